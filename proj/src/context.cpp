#include "mhqa/context.hpp"

#include "mhqa/errors.hpp"
#include "mhqa/utf8.hpp"

namespace mhqa {

Context build_context(const std::vector<const Passage*>& passages, bool with_sentinels, std::size_t max_tokens) {
    Context ctx;
    auto full = [&] { return max_tokens != 0 && ctx.tokens.size() >= max_tokens; };
    if (with_sentinels) {
        for (const char* s : {"yes", "no"}) {
            ctx.tokens.emplace_back(s);
            ctx.sources.push_back({});
        }
        ctx.num_sentinels = 2;
    }
    for (const Passage* p : passages) {
        if (full()) {
            break;
        }
        ContextBlock block;
        block.passage_id = p->id;
        block.title = p->title;
        block.text = p->text;
        block.title_tokens = p->title_tokens;
        block.text_tokens = p->text_tokens;
        const std::size_t index = ctx.blocks.size();
        block.title_begin = ctx.tokens.size();
        for (std::size_t i = 0; i < p->title_tokens.size() && !full(); ++i) {
            ctx.tokens.push_back(p->title_tokens.tokens[i]);
            ctx.sources.push_back({index, true, i});
        }
        block.title_end = ctx.tokens.size();
        block.text_begin = ctx.tokens.size();
        for (std::size_t i = 0; i < p->text_tokens.size() && !full(); ++i) {
            ctx.tokens.push_back(p->text_tokens.tokens[i]);
            ctx.sources.push_back({index, false, i});
        }
        block.text_end = ctx.tokens.size();
        ctx.blocks.push_back(std::move(block));
    }
    return ctx;
}

std::optional<std::size_t> Context::text_position(std::size_t block, std::size_t text_token) const {
    if (block >= blocks.size()) {
        return std::nullopt;
    }
    const auto& b = blocks[block];
    const std::size_t pos = b.text_begin + text_token;
    if (pos >= b.text_end) {
        return std::nullopt;
    }
    return pos;
}

std::string Context::slice(std::size_t s, std::size_t e) const {
    if (s > e || e >= tokens.size()) {
        throw ValidationError("context slice [" + std::to_string(s) + ", " + std::to_string(e) + "] out of range");
    }
    if (s < num_sentinels) {
        return tokens[s];
    }
    std::string out;
    std::size_t i = s;
    while (i <= e) {
        const TokenSource& src = sources[i];
        // Extend to the last token of the same field.
        std::size_t j = i;
        while (j + 1 <= e && sources[j + 1].block == src.block && sources[j + 1].in_title == src.in_title) {
            ++j;
        }
        const auto& block = blocks[src.block];
        const TokenSeq& seq = src.in_title ? block.title_tokens : block.text_tokens;
        const std::string& field = src.in_title ? block.title : block.text;
        const std::size_t begin = seq.char_offsets[src.token].first;
        const std::size_t end = seq.char_offsets[sources[j].token].second;
        if (!out.empty()) {
            out += ' ';
        }
        out += utf8::slice(field, begin, end);
        i = j + 1;
    }
    return out;
}

}  // namespace mhqa
