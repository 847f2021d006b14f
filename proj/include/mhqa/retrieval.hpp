#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mhqa/corpus.hpp"

namespace mhqa {

struct Posting {
    std::uint32_t doc;  // passage index in the corpus
    std::uint32_t tf;
};

/// Postings over one field (body text or title) of every passage.
struct FieldIndex {
    std::unordered_map<std::string, std::vector<Posting>> postings;
    std::vector<std::size_t> doc_len;
    double avg_doc_len = 0.0;

    std::size_t df(const std::string& term) const {
        auto it = postings.find(term);
        return it == postings.end() ? 0 : it->second.size();
    }
};

struct InvertedIndex {
    FieldIndex body;
    FieldIndex title;
    std::size_t num_docs = 0;
    std::vector<std::string> doc_ids;
    std::unordered_map<std::string, std::size_t> doc_index;
    // Precomputed tf-idf norms of the title vectors.
    std::vector<double> title_norm;

    std::size_t lookup(std::string_view passage_id) const;
};

/// BM25 over the body plus lambda times tf-idf cosine over the title.
struct RetrievalParams {
    double k1 = 1.2;
    double b = 0.75;
    double lambda = 1.0;
};

struct RetrievalResult {
    std::string passage_id;
    double score = 0.0;
    std::size_t rank = 0;  // 1-based
};

InvertedIndex build_index(const Corpus& corpus);

/// ln((N - df + 0.5) / (df + 0.5) + 1); always positive.
double bm25_idf(std::size_t num_docs, std::size_t df);

/// Smoothed idf used by the title channel: ln((N + 1) / (df + 1)) + 1.
double title_idf(std::size_t num_docs, std::size_t df);

double bm25_score(const InvertedIndex& index, const TokenSeq& question, std::size_t doc,
                  const RetrievalParams& params);
double title_cosine(const InvertedIndex& index, const TokenSeq& question, std::size_t doc);

double hybrid_score(const InvertedIndex& index, const TokenSeq& question,
                    std::string_view passage_id, const RetrievalParams& params = {});

/// Top-k passages by hybrid score; zero-score passages are never returned.
/// Ties break by passage id ascending.
std::vector<RetrievalResult> retrieve_start_passages(const InvertedIndex& index,
                                                     const TokenSeq& question, std::size_t k,
                                                     const RetrievalParams& params = {});

}  // namespace mhqa
