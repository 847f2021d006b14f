#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mhqa/nc/graph.hpp"
#include "mhqa/nc/param_store.hpp"
#include "mhqa/rng.hpp"

namespace mhqa {

struct SpanModelConfig {
    std::size_t embed_dim = 16;
    std::size_t hidden = 16;  // per direction; encoder states are 2 * hidden wide
    double dropout = 0.2;
};

/// Training-time state threaded through forward passes. A null pointer
/// means inference (dropout off).
struct TrainContext {
    Rng* rng = nullptr;
    double dropout = 0.0;
};

/// Sequence of per-position states with a validity mask (1 = real token).
struct EncodedSeq {
    nc::Var states;
    std::vector<char> mask;

    std::size_t length() const { return mask.size(); }
};

/// Per-position start and end logits; masked positions hold -inf.
struct SpanScores {
    std::vector<double> start_logits;
    std::vector<double> end_logits;
};

struct SpanOutput {
    EncodedSeq final_states;  // T x 2h, the representation each head reads
    nc::Var start_logits;     // 1 x T
    nc::Var end_logits;       // 1 x T

    SpanScores scores() const;
};

/// The shared span prediction network: embeddings, one bidirectional GRU for
/// question and context, trilinear bidirectional attention, a ReLU projection,
/// masked self-attention with a residual connection, and linear start/end
/// heads. All parameters live under `prefix` in a ParamStore; the embedding
/// matrix is referenced by name so several models can share it.
class SpanModel {
  public:
    SpanModel(std::string prefix, SpanModelConfig config, std::string embedding_param);

    void init_params(nc::ParamStore& store, Rng& rng) const;

    const SpanModelConfig& config() const { return config_; }
    const std::string& prefix() const { return prefix_; }
    std::size_t state_dim() const { return 2 * config_.hidden; }

    nc::Var embed(nc::Graph& g, const std::vector<std::size_t>& token_ids) const;
    EncodedSeq encode(nc::Graph& g, const std::vector<std::size_t>& token_ids, TrainContext* train = nullptr) const;
    /// Question-aware context states, T x 8h: [h; u~; h*u~; h*h~].
    EncodedSeq biattention(nc::Graph& g, const EncodedSeq& context, const EncodedSeq& question) const;
    /// ReLU(G W + b) back down to 2h.
    EncodedSeq project(nc::Graph& g, const EncodedSeq& attended) const;
    EncodedSeq self_attention(nc::Graph& g, const EncodedSeq& context) const;
    SpanOutput span_heads(nc::Graph& g, const EncodedSeq& context) const;

    /// encode -> biattention -> project -> self_attention -> span_heads.
    SpanOutput forward(nc::Graph& g, const std::vector<std::size_t>& context_ids,
                       const std::vector<std::size_t>& question_ids, TrainContext* train = nullptr) const;

  private:
    std::string name(const std::string& leaf) const { return prefix_ + "." + leaf; }

    std::string prefix_;
    SpanModelConfig config_;
    std::string embedding_param_;
};

/// cross_entropy(start, gold_start) + cross_entropy(end, gold_end), softmax
/// over the full context.
nc::Var span_nll_loss(const SpanOutput& output, std::size_t gold_start, std::size_t gold_end);

}  // namespace mhqa
