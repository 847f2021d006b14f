#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mhqa/corpus.hpp"
#include "mhqa/nc/tensor.hpp"

namespace mhqa {

class Rng;

/// Token -> row mapping. Row 0 is reserved for unknown tokens.
class Vocabulary {
  public:
    static constexpr std::size_t kUnk = 0;
    static constexpr const char* kUnkToken = "<unk>";

    Vocabulary();
    /// `tokens` excludes the unknown token; duplicates are ignored.
    explicit Vocabulary(const std::vector<std::string>& tokens);

    std::size_t id(std::string_view token) const;
    std::vector<std::size_t> ids(const std::vector<std::string>& tokens) const;
    bool contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }
    const std::vector<std::string>& tokens() const { return tokens_; }
    std::size_t size() const { return tokens_.size(); }

    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Sorted vocabulary over every title, passage and question token.
Vocabulary build_vocabulary(const Corpus& corpus, const std::vector<std::vector<QARecord>>& question_sets);

/// Pre-trained vectors in the plain-text format: token followed by d floats
/// per line, d taken from the first line.
struct WordVectors {
    std::size_t dim = 0;
    std::unordered_map<std::string, std::vector<double>> vectors;
};

WordVectors load_word_vectors(const std::filesystem::path& path);

/// |V| x dim matrix: rows of tokens found in `pretrained` copy those vectors,
/// the rest (and the unknown row) are drawn uniformly from [-0.1, 0.1].
nc::Tensor init_embedding_matrix(const Vocabulary& vocab, std::size_t dim, const WordVectors* pretrained,
                                 Rng& rng);

}  // namespace mhqa
