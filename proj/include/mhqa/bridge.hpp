#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mhqa/context.hpp"
#include "mhqa/corpus.hpp"
#include "mhqa/nc/graph.hpp"
#include "mhqa/span_model.hpp"
#include "mhqa/train.hpp"
#include "mhqa/vocab.hpp"

namespace mhqa {

// ---- distant supervision -------------------------------------------------

struct BridgeLabel {
    std::string question_id;
    std::string gold_title;
};

struct SkippedQuestion {
    std::string question_id;
    std::string reason;
};

struct LabelSet {
    std::vector<BridgeLabel> labels;
    std::vector<SkippedQuestion> skipped;

    const BridgeLabel* find(const std::string& qid) const;
};

/// Gold bridge = the supporting passage whose text contains the answer. When
/// several qualify one is drawn with a generator keyed by (seed, question id).
LabelSet derive_bridge_labels(const std::vector<QARecord>& questions, const Corpus& corpus, std::uint64_t seed);

// ---- candidates ----------------------------------------------------------

struct BridgeCandidate {
    AnchorMention mention;
    std::string source_passage_id;
    std::string target_title;
    std::size_t context_position = 0;  // anchor start token inside the context
    std::vector<double> h_context;
    std::vector<double> h_content;
    double fused_score = 0.0;
    bool missing_abstract = false;
};

/// One candidate per anchor mention whose target exists in the corpus.
std::vector<BridgeCandidate> collect_candidates(const std::vector<const Passage*>& start_passages,
                                                const Corpus& corpus);

// ---- entity linking ------------------------------------------------------

struct LinkedTitle {
    std::string title;
    double score = 0.0;
};

/// Question text -> ranked corpus titles.
class EntityLinker {
  public:
    virtual ~EntityLinker() = default;
    virtual std::vector<LinkedTitle> link(const std::string& question) const = 0;
};

/// Titles whose tokens all occur in the question, longest title first. A
/// trailing parenthetical such as "(1945 film)" is ignored when matching.
class ExactTitleLinker : public EntityLinker {
  public:
    explicit ExactTitleLinker(const Corpus& corpus);
    std::vector<LinkedTitle> link(const std::string& question) const override;

  private:
    struct Entry {
        std::string title;
        std::vector<std::string> tokens;
    };
    std::vector<Entry> entries_;
};

/// Up to `top_n` linked passages not already in `start`. A null linker means
/// linking is disabled. Linker failures yield no passages and a warning.
std::vector<const Passage*> expand_with_entity_linking(const std::string& question,
                                                       const std::vector<const Passage*>& start,
                                                       const EntityLinker* linker, const Corpus& corpus,
                                                       std::size_t top_n, std::vector<std::string>* warnings = nullptr);

// ---- ranking -------------------------------------------------------------

struct RankedPassage {
    std::string title;
    double score = 0.0;
};

/// Max score per target title, sorted descending with ties by title, top k.
std::vector<RankedPassage> rank_answer_passages(const std::vector<BridgeCandidate>& candidates, std::size_t k);
std::vector<std::string> titles_of(const std::vector<RankedPassage>& ranked);

// ---- the reasoner --------------------------------------------------------

enum class BridgeVariant { full, no_context_evidence, no_content_evidence };

std::string to_string(BridgeVariant v);

struct BridgeConfig {
    SpanModelConfig span;
    std::size_t abstract_hidden = 16;
    BridgeVariant variant = BridgeVariant::full;
    std::size_t max_context_tokens = 0;
};

/// Everything needed to score one question: its start-passage context, the
/// anchor candidates in it, and the token ids of every target abstract.
struct BridgeInstance {
    std::string question_id;
    std::vector<std::size_t> question_ids;
    Context context;
    std::vector<std::size_t> context_ids;
    std::vector<BridgeCandidate> candidates;
    std::vector<std::string> targets;                  // unique target titles
    std::vector<std::vector<std::size_t>> target_ids;  // abstract token ids per target
    std::vector<std::size_t> candidate_target;         // candidate -> index into targets
};

class BridgeReasoner {
  public:
    static constexpr const char* kEmbedding = "emb";

    explicit BridgeReasoner(BridgeConfig config);

    const BridgeConfig& config() const { return config_; }

    void init_params(nc::ParamStore& store, const Vocabulary& vocab, const WordVectors* pretrained, Rng& rng) const;

    BridgeInstance prepare(const std::string& question_id, const std::string& question,
                           const std::vector<const Passage*>& start_passages, const Corpus& corpus,
                           const Vocabulary& vocab) const;

    /// Fused scores of all candidates as a 1 x M row. Requires M >= 1.
    nc::Var logits(nc::Graph& g, const BridgeInstance& instance, TrainContext* train = nullptr) const;

    /// Inference: fills fused scores and both evidence vectors.
    std::vector<BridgeCandidate> score_bridges(nc::ParamStore& store, const BridgeInstance& instance) const;

  private:
    nc::Var context_evidence(nc::Graph& g, const BridgeInstance& instance, TrainContext* train) const;
    nc::Var content_evidence(nc::Graph& g, const BridgeInstance& instance, TrainContext* train,
                             std::vector<char>* missing) const;

    BridgeConfig config_;
    SpanModel span_;
};

/// Indices of candidates whose target is `gold_title`.
std::vector<std::size_t> gold_candidates(const std::vector<BridgeCandidate>& candidates, const std::string& gold_title);

/// Marginal NLL over the mention-level softmax. Throws ValidationError when
/// no candidate targets the gold title.
nc::Var bridge_loss(nc::Var logits, const std::vector<BridgeCandidate>& candidates, const std::string& gold_title);

struct BridgeExample {
    BridgeInstance instance;
    std::string gold_title;
};

std::vector<double> train_bridge(const BridgeReasoner& reasoner, nc::ParamStore& store,
                                 const std::vector<BridgeExample>& examples, const TrainOptions& options,
                                 const EpochCallback& on_epoch = {});

}  // namespace mhqa
