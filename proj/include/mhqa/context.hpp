#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mhqa/corpus.hpp"

namespace mhqa {

/// Where a context token came from. Sentinel tokens have block == kNone.
struct TokenSource {
    static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

    std::size_t block = kNone;
    bool in_title = false;
    std::size_t token = 0;  // index within the title or text token sequence
};

struct ContextBlock {
    std::string passage_id;
    std::string title;
    std::string text;
    std::size_t title_begin = 0;  // token range of the title, end exclusive
    std::size_t title_end = 0;
    std::size_t text_begin = 0;
    std::size_t text_end = 0;  // may stop short of the passage when capped
    TokenSeq title_tokens;
    TokenSeq text_tokens;
};

/// One flat token sequence made of [title tokens, text tokens] blocks, one
/// per passage, optionally prefixed by the "yes" and "no" sentinels.
struct Context {
    std::vector<std::string> tokens;
    std::vector<TokenSource> sources;
    std::vector<ContextBlock> blocks;
    std::size_t num_sentinels = 0;

    std::size_t size() const { return tokens.size(); }
    bool empty() const { return tokens.empty(); }

    /// Original text covered by tokens [s, e]. Sentinels decode to their
    /// literal token; spans crossing fields join the pieces with a space.
    std::string slice(std::size_t s, std::size_t e) const;

    /// Context position of a text token of a block, if it survived the cap.
    std::optional<std::size_t> text_position(std::size_t block, std::size_t text_token) const;
};

/// Builds a context from passages in order. `max_tokens` == 0 means no cap;
/// otherwise tokens beyond the cap are dropped, possibly mid-passage.
Context build_context(const std::vector<const Passage*>& passages, bool with_sentinels, std::size_t max_tokens = 0);

}  // namespace mhqa
