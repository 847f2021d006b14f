#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mhqa {

/// Lowercased alphanumeric runs with their code-point offsets into the
/// source string.
struct TokenSeq {
    std::vector<std::string> tokens;
    std::vector<std::pair<std::size_t, std::size_t>> char_offsets;

    std::size_t size() const { return tokens.size(); }
    bool empty() const { return tokens.empty(); }
};

TokenSeq tokenize(std::string_view text);

/// A hyperlink inside a passage's text. Character offsets count Unicode code
/// points, end exclusive; token offsets are inclusive on both ends.
struct AnchorMention {
    std::string target_title;
    std::size_t char_start = 0;
    std::size_t char_end = 0;
    std::size_t token_start = 0;
    std::size_t token_end = 0;

    bool operator==(const AnchorMention&) const = default;
};

struct Passage {
    std::string id;
    std::string title;
    std::string text;
    std::vector<AnchorMention> anchors;
    TokenSeq title_tokens;
    TokenSeq text_tokens;

    bool operator==(const Passage& other) const {
        return id == other.id && title == other.title && text == other.text &&
               anchors == other.anchors;
    }
};

/// Maps a mention's character span onto the tokens it overlaps. Throws
/// AlignmentError when the span covers no token (e.g. punctuation only).
AnchorMention align_anchor(const Passage& passage, const AnchorMention& mention);

/// Immutable, validated passage collection. Titles and ids are unique;
/// every anchor is token-aligned and duplicates (same target and span) are
/// dropped. Anchors whose target is missing are kept.
class Corpus {
  public:
    Corpus() = default;
    explicit Corpus(std::vector<Passage> passages);

    const std::vector<Passage>& passages() const { return passages_; }
    std::size_t size() const { return passages_.size(); }
    bool empty() const { return passages_.empty(); }

    const Passage* find_title(std::string_view title) const;
    const Passage* find_id(std::string_view id) const;
    const Passage& at(std::size_t index) const { return passages_.at(index); }
    std::optional<std::size_t> index_of_title(std::string_view title) const;

    bool operator==(const Corpus& other) const { return passages_ == other.passages_; }

  private:
    std::vector<Passage> passages_;
    std::unordered_map<std::string, std::size_t> by_title_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

Corpus parse_corpus(std::istream& in, const std::string& source = "<stream>");
Corpus load_corpus(const std::filesystem::path& path);
void write_corpus(std::ostream& out, const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

enum class QuestionType { bridge, comparison };

std::string_view to_string(QuestionType type);
QuestionType parse_question_type(std::string_view text);

struct QARecord {
    std::string id;
    std::string question;
    std::string answer;
    QuestionType qtype = QuestionType::bridge;
    std::optional<std::vector<std::string>> supporting_titles;
};

std::vector<QARecord> parse_questions(std::istream& in, const std::string& source = "<stream>");
std::vector<QARecord> load_questions(const std::filesystem::path& path);

}  // namespace mhqa
