#include "mhqa/corpus.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mhqa/errors.hpp"
#include "mhqa/utf8.hpp"

namespace mhqa {

using nlohmann::json;

TokenSeq tokenize(std::string_view text) {
    TokenSeq seq;
    std::string current;
    std::size_t start = 0;
    std::size_t index = 0;
    bool in_token = false;
    for (const auto& cp : utf8::decode(text)) {
        if (utf8::is_alnum(cp.value)) {
            if (!in_token) {
                in_token = true;
                start = index;
                current.clear();
            }
            utf8::append(current, utf8::to_lower(cp.value));
        } else if (in_token) {
            seq.tokens.push_back(current);
            seq.char_offsets.emplace_back(start, index);
            in_token = false;
        }
        ++index;
    }
    if (in_token) {
        seq.tokens.push_back(current);
        seq.char_offsets.emplace_back(start, index);
    }
    return seq;
}

AnchorMention align_anchor(const Passage& passage, const AnchorMention& mention) {
    const TokenSeq tokens =
        passage.text_tokens.empty() ? tokenize(passage.text) : passage.text_tokens;
    AnchorMention out = mention;
    bool found = false;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto [s, e] = tokens.char_offsets[i];
        if (s < mention.char_end && e > mention.char_start) {
            if (!found) {
                out.token_start = i;
                found = true;
            }
            out.token_end = i;
        }
    }
    if (!found) {
        throw AlignmentError("anchor to '" + mention.target_title + "' at [" +
                             std::to_string(mention.char_start) + ", " +
                             std::to_string(mention.char_end) + ") in passage '" + passage.id +
                             "' covers no token");
    }
    return out;
}

Corpus::Corpus(std::vector<Passage> passages) : passages_(std::move(passages)) {
    for (std::size_t i = 0; i < passages_.size(); ++i) {
        Passage& p = passages_[i];
        if (p.title.empty()) {
            throw ValidationError("passage '" + p.id + "' has an empty title");
        }
        if (!by_title_.emplace(p.title, i).second) {
            throw ValidationError("duplicate passage title '" + p.title + "'");
        }
        if (!by_id_.emplace(p.id, i).second) {
            throw ValidationError("duplicate passage id '" + p.id + "'");
        }
        p.title_tokens = tokenize(p.title);
        p.text_tokens = tokenize(p.text);
        const std::size_t len = utf8::length(p.text);
        std::vector<AnchorMention> aligned;
        for (const auto& a : p.anchors) {
            if (a.char_start >= a.char_end || a.char_end > len) {
                throw ValidationError("anchor span [" + std::to_string(a.char_start) + ", " +
                                      std::to_string(a.char_end) + ") out of bounds in passage '" +
                                      p.id + "' (text length " + std::to_string(len) + ")");
            }
            bool duplicate = false;
            for (const auto& seen : aligned) {
                if (seen.target_title == a.target_title && seen.char_start == a.char_start &&
                    seen.char_end == a.char_end) {
                    duplicate = true;
                    break;
                }
            }
            if (!duplicate) {
                aligned.push_back(align_anchor(p, a));
            }
        }
        p.anchors = std::move(aligned);
    }
}

const Passage* Corpus::find_title(std::string_view title) const {
    auto it = by_title_.find(std::string(title));
    return it == by_title_.end() ? nullptr : &passages_[it->second];
}

const Passage* Corpus::find_id(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &passages_[it->second];
}

std::optional<std::size_t> Corpus::index_of_title(std::string_view title) const {
    auto it = by_title_.find(std::string(title));
    if (it == by_title_.end()) {
        return std::nullopt;
    }
    return it->second;
}

namespace {

std::string where(const std::string& source, std::size_t line) {
    return source + ":" + std::to_string(line) + ": ";
}

template <typename Fn>
void for_each_json_line(std::istream& in, const std::string& source, Fn&& fn) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(where(source, lineno) + e.what());
        }
        try {
            fn(j, lineno);
        } catch (const json::exception& e) {
            throw ParseError(where(source, lineno) + e.what());
        }
    }
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open '" + path.string() + "'");
    }
    return in;
}

}  // namespace

Corpus parse_corpus(std::istream& in, const std::string& source) {
    std::vector<Passage> passages;
    for_each_json_line(in, source, [&](const json& j, std::size_t lineno) {
        Passage p;
        p.id = j.at("id").get<std::string>();
        p.title = j.at("title").get<std::string>();
        p.text = j.at("text").get<std::string>();
        if (j.contains("anchors")) {
            for (const auto& a : j.at("anchors")) {
                const auto start = a.at("start").get<long long>();
                const auto end = a.at("end").get<long long>();
                if (start < 0 || end < 0) {
                    throw ValidationError(where(source, lineno) + "negative anchor offset in passage '" +
                                          p.id + "'");
                }
                p.anchors.push_back({a.at("target").get<std::string>(),
                                     static_cast<std::size_t>(start),
                                     static_cast<std::size_t>(end)});
            }
        }
        passages.push_back(std::move(p));
    });
    return Corpus(std::move(passages));
}

Corpus load_corpus(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    return parse_corpus(in, path.string());
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
    for (const auto& p : corpus.passages()) {
        json anchors = json::array();
        for (const auto& a : p.anchors) {
            anchors.push_back({{"target", a.target_title}, {"start", a.char_start}, {"end", a.char_end}});
        }
        json j = {{"id", p.id}, {"title", p.title}, {"text", p.text}, {"anchors", anchors}};
        out << j.dump() << '\n';
    }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write '" + path.string() + "'");
    }
    write_corpus(out, corpus);
}

std::string_view to_string(QuestionType type) {
    return type == QuestionType::bridge ? "bridge" : "comparison";
}

QuestionType parse_question_type(std::string_view text) {
    if (text == "bridge") {
        return QuestionType::bridge;
    }
    if (text == "comparison") {
        return QuestionType::comparison;
    }
    throw ValidationError("unknown question type '" + std::string(text) + "'");
}

std::vector<QARecord> parse_questions(std::istream& in, const std::string& source) {
    std::vector<QARecord> out;
    for_each_json_line(in, source, [&](const json& j, std::size_t lineno) {
        QARecord r;
        r.id = j.at("id").get<std::string>();
        r.question = j.at("question").get<std::string>();
        if (!j.contains("answer") || !j.at("answer").is_string()) {
            throw ValidationError(where(source, lineno) + "question '" + r.id + "' has no answer");
        }
        r.answer = j.at("answer").get<std::string>();
        try {
            r.qtype = parse_question_type(j.at("type").get<std::string>());
        } catch (const ValidationError& e) {
            throw ValidationError(where(source, lineno) + e.what());
        }
        if (j.contains("supporting_titles") && !j.at("supporting_titles").is_null()) {
            auto titles = j.at("supporting_titles").get<std::vector<std::string>>();
            if (titles.empty()) {
                throw ValidationError(where(source, lineno) + "question '" + r.id +
                                      "' has an empty supporting_titles list");
            }
            r.supporting_titles = std::move(titles);
        }
        out.push_back(std::move(r));
    });
    return out;
}

std::vector<QARecord> load_questions(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    return parse_questions(in, path.string());
}

}  // namespace mhqa
