#include "mhqa/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mhqa/errors.hpp"

namespace mhqa {

namespace {

void add_field(FieldIndex& field, std::uint32_t doc, const TokenSeq& tokens) {
    std::map<std::string, std::uint32_t> counts;
    for (const auto& t : tokens.tokens) {
        ++counts[t];
    }
    for (const auto& [term, tf] : counts) {
        field.postings[term].push_back({doc, tf});
    }
    field.doc_len.push_back(tokens.size());
}

void finish_field(FieldIndex& field) {
    double total = 0.0;
    for (auto len : field.doc_len) {
        total += static_cast<double>(len);
    }
    field.avg_doc_len = field.doc_len.empty() ? 0.0 : total / static_cast<double>(field.doc_len.size());
}

std::uint32_t term_frequency(const FieldIndex& field, const std::string& term, std::size_t doc) {
    auto it = field.postings.find(term);
    if (it == field.postings.end()) {
        return 0;
    }
    const auto& list = it->second;
    auto pos = std::lower_bound(list.begin(), list.end(), doc,
                                [](const Posting& p, std::size_t d) { return p.doc < d; });
    return (pos != list.end() && pos->doc == doc) ? pos->tf : 0;
}

std::map<std::string, std::uint32_t> term_counts(const TokenSeq& seq) {
    std::map<std::string, std::uint32_t> counts;
    for (const auto& t : seq.tokens) {
        ++counts[t];
    }
    return counts;
}

double query_title_norm(const InvertedIndex& index, const std::map<std::string, std::uint32_t>& q) {
    double norm = 0.0;
    for (const auto& [term, tf] : q) {
        const double w = tf * title_idf(index.num_docs, index.title.df(term));
        norm += w * w;
    }
    return std::sqrt(norm);
}

}  // namespace

std::size_t InvertedIndex::lookup(std::string_view passage_id) const {
    auto it = doc_index.find(std::string(passage_id));
    if (it == doc_index.end()) {
        throw ValidationError("passage '" + std::string(passage_id) + "' is not in the index");
    }
    return it->second;
}

InvertedIndex build_index(const Corpus& corpus) {
    if (corpus.empty()) {
        throw ValidationError("cannot build an index over an empty corpus");
    }
    InvertedIndex index;
    index.num_docs = corpus.size();
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const Passage& p = corpus.at(i);
        index.doc_ids.push_back(p.id);
        index.doc_index.emplace(p.id, i);
        add_field(index.body, static_cast<std::uint32_t>(i), p.text_tokens);
        add_field(index.title, static_cast<std::uint32_t>(i), p.title_tokens);
    }
    finish_field(index.body);
    finish_field(index.title);

    index.title_norm.assign(index.num_docs, 0.0);
    for (const auto& [term, list] : index.title.postings) {
        const double idf = title_idf(index.num_docs, list.size());
        for (const auto& p : list) {
            const double w = p.tf * idf;
            index.title_norm[p.doc] += w * w;
        }
    }
    for (auto& n : index.title_norm) {
        n = std::sqrt(n);
    }
    return index;
}

double bm25_idf(std::size_t num_docs, std::size_t df) {
    const double n = static_cast<double>(num_docs);
    const double d = static_cast<double>(df);
    return std::log((n - d + 0.5) / (d + 0.5) + 1.0);
}

double title_idf(std::size_t num_docs, std::size_t df) {
    return std::log((static_cast<double>(num_docs) + 1.0) / (static_cast<double>(df) + 1.0)) + 1.0;
}

double bm25_score(const InvertedIndex& index, const TokenSeq& question, std::size_t doc,
                  const RetrievalParams& params) {
    const double len_norm = index.body.avg_doc_len > 0.0
                                ? static_cast<double>(index.body.doc_len[doc]) / index.body.avg_doc_len
                                : 0.0;
    const double denom_base = params.k1 * (1.0 - params.b + params.b * len_norm);
    double score = 0.0;
    for (const auto& term : question.tokens) {
        const std::uint32_t tf = term_frequency(index.body, term, doc);
        if (tf == 0) {
            continue;
        }
        const double f = static_cast<double>(tf);
        score += bm25_idf(index.num_docs, index.body.df(term)) * f * (params.k1 + 1.0) / (f + denom_base);
    }
    return score;
}

double title_cosine(const InvertedIndex& index, const TokenSeq& question, std::size_t doc) {
    if (index.title_norm[doc] == 0.0) {
        return 0.0;
    }
    const auto q = term_counts(question);
    double dot = 0.0;
    for (const auto& [term, qtf] : q) {
        const std::uint32_t tf = term_frequency(index.title, term, doc);
        if (tf == 0) {
            continue;
        }
        const double idf = title_idf(index.num_docs, index.title.df(term));
        dot += (qtf * idf) * (tf * idf);
    }
    if (dot == 0.0) {
        return 0.0;
    }
    return dot / (query_title_norm(index, q) * index.title_norm[doc]);
}

double hybrid_score(const InvertedIndex& index, const TokenSeq& question,
                    std::string_view passage_id, const RetrievalParams& params) {
    const std::size_t doc = index.lookup(passage_id);
    double score = bm25_score(index, question, doc, params);
    if (params.lambda != 0.0) {
        score += params.lambda * title_cosine(index, question, doc);
    }
    return score;
}

std::vector<RetrievalResult> retrieve_start_passages(const InvertedIndex& index,
                                                     const TokenSeq& question, std::size_t k,
                                                     const RetrievalParams& params) {
    if (k < 1) {
        throw ValidationError("retrieval depth k must be at least 1");
    }
    // Candidate documents are those sharing a term with the question; the
    // per-document scores reuse the single-document scorer so both entry
    // points agree bit for bit.
    std::vector<char> touched(index.num_docs, 0);
    for (const auto& term : question.tokens) {
        for (const FieldIndex* field : {&index.body, &index.title}) {
            auto it = field->postings.find(term);
            if (it == field->postings.end()) {
                continue;
            }
            for (const auto& p : it->second) {
                touched[p.doc] = 1;
            }
        }
    }
    std::vector<RetrievalResult> results;
    for (std::size_t doc = 0; doc < index.num_docs; ++doc) {
        if (!touched[doc]) {
            continue;
        }
        double score = bm25_score(index, question, doc, params);
        if (params.lambda != 0.0) {
            score += params.lambda * title_cosine(index, question, doc);
        }
        if (score > 0.0) {
            results.push_back({index.doc_ids[doc], score, 0});
        }
    }
    std::sort(results.begin(), results.end(), [](const RetrievalResult& a, const RetrievalResult& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.passage_id < b.passage_id;
    });
    if (results.size() > k) {
        results.resize(k);
    }
    for (std::size_t i = 0; i < results.size(); ++i) {
        results[i].rank = i + 1;
    }
    return results;
}

}  // namespace mhqa
