#pragma once

// Independent reference implementations used only by tests. None of these
// call into the code paths they check.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mhqa/corpus.hpp"
#include "mhqa/nc/tensor.hpp"

namespace mhqa::oracle {

/// Okapi BM25 by direct scan of every document. Each query token occurrence
/// contributes once.
inline double brute_force_bm25(const std::vector<std::vector<std::string>>& docs,
                               const std::vector<std::string>& query, std::size_t doc, double k1, double b) {
    const double n = static_cast<double>(docs.size());
    double total_len = 0.0;
    for (const auto& d : docs) {
        total_len += static_cast<double>(d.size());
    }
    const double avgdl = total_len / n;
    double score = 0.0;
    for (const auto& term : query) {
        double df = 0.0;
        for (const auto& d : docs) {
            if (std::find(d.begin(), d.end(), term) != d.end()) {
                df += 1.0;
            }
        }
        const double tf = static_cast<double>(std::count(docs[doc].begin(), docs[doc].end(), term));
        if (tf == 0.0) {
            continue;
        }
        const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
        const double dl = static_cast<double>(docs[doc].size());
        score += idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * dl / avgdl));
    }
    return score;
}

inline nc::Tensor naive_matmul(const nc::Tensor& a, const nc::Tensor& b) {
    nc::Tensor out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                s += a(i, k) * b(k, j);
            }
            out(i, j) = s;
        }
    }
    return out;
}

inline double scalar_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// One GRU step written element by element from the gate equations.
inline std::vector<double> scalar_gru_step(const std::vector<double>& x, const std::vector<double>& h,
                                           const nc::Tensor& wz, const nc::Tensor& wr, const nc::Tensor& wh,
                                           const nc::Tensor& bz, const nc::Tensor& br, const nc::Tensor& bh) {
    const std::size_t in = x.size(), hid = h.size();
    std::vector<double> out(hid);
    std::vector<double> r(hid), z(hid);
    for (std::size_t j = 0; j < hid; ++j) {
        double az = bz(0, j), ar = br(0, j);
        for (std::size_t i = 0; i < in; ++i) {
            az += x[i] * wz(i, j);
            ar += x[i] * wr(i, j);
        }
        for (std::size_t i = 0; i < hid; ++i) {
            az += h[i] * wz(in + i, j);
            ar += h[i] * wr(in + i, j);
        }
        z[j] = scalar_sigmoid(az);
        r[j] = scalar_sigmoid(ar);
    }
    for (std::size_t j = 0; j < hid; ++j) {
        double ah = bh(0, j);
        for (std::size_t i = 0; i < in; ++i) {
            ah += x[i] * wh(i, j);
        }
        for (std::size_t i = 0; i < hid; ++i) {
            ah += r[i] * h[i] * wh(in + i, j);
        }
        const double cand = std::tanh(ah);
        out[j] = z[j] * h[j] + (1.0 - z[j]) * cand;
    }
    return out;
}

struct SpanChoice {
    std::size_t start = 0;
    std::size_t end = 0;
    double score = -std::numeric_limits<double>::infinity();
};

/// Exhaustive search over every span with start <= end < start + max_len.
/// Strictly-greater comparison while scanning starts, then ends, in
/// increasing order gives the smaller-start, smaller-end tie-break.
inline SpanChoice brute_force_best_span(const std::vector<double>& start, const std::vector<double>& end,
                                        std::size_t max_len) {
    SpanChoice best;
    bool found = false;
    for (std::size_t s = 0; s < start.size(); ++s) {
        for (std::size_t e = s; e < end.size() && e < s + max_len; ++e) {
            const double v = start[s] + end[e];
            if (std::isinf(v) && v < 0) {
                continue;
            }
            if (!found || v > best.score) {
                best = {s, e, v};
                found = true;
            }
        }
    }
    return best;
}

}  // namespace mhqa::oracle
