#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mhqa/bridge.hpp"
#include "mhqa/context.hpp"
#include "mhqa/span_model.hpp"
#include "mhqa/train.hpp"
#include "mhqa/vocab.hpp"

namespace mhqa {

using TokenSpan = std::pair<std::size_t, std::size_t>;  // inclusive

struct SpanChoice {
    std::size_t start = 0;
    std::size_t end = 0;
    double score = 0.0;
};

/// argmax of start[s] + end[e] over s <= e < s + max_len; ties go to the
/// smaller s, then the smaller e. Throws ValidationError when no finite span
/// exists.
SpanChoice best_span(const SpanScores& scores, std::size_t max_len);

/// Original text of the best span, or "yes"/"no" when it starts on a sentinel.
std::string decode_answer(const SpanScores& scores, const Context& context, std::size_t max_len = 30);

/// First span (smallest start, then shortest) whose text normalizes to the
/// answer and whose boundary tokens are not articles. Yes/no answers map
/// onto their sentinel.
std::optional<TokenSpan> locate_answer(const Context& context, const std::string& answer, std::size_t max_len);

/// Title tokens of the first block whose title equals `title`.
std::optional<TokenSpan> locate_title(const Context& context, const std::string& title);

struct ReaderExample {
    std::string question_id;
    std::vector<std::size_t> question_ids;
    Context context;
    std::vector<std::size_t> context_ids;
    std::vector<std::string> passages;  // titles in context order
    std::optional<TokenSpan> answer_span;
    std::optional<TokenSpan> title_span;
};

ReaderExample make_reader_example(const std::string& question_id, const std::string& question,
                                  const std::vector<const Passage*>& passages, const Vocabulary& vocab,
                                  std::size_t max_context_tokens);

struct ReaderConfig {
    SpanModelConfig span;
    std::size_t max_span_len = 30;
    std::size_t max_context_tokens = 0;
    double aux_weight = 1.0;
};

class Reader {
  public:
    static constexpr const char* kEmbedding = "emb";

    explicit Reader(ReaderConfig config);

    const ReaderConfig& config() const { return config_; }

    void init_params(nc::ParamStore& store, const Vocabulary& vocab, const WordVectors* pretrained, Rng& rng) const;
    SpanOutput forward(nc::Graph& g, const ReaderExample& example, TrainContext* train = nullptr) const;
    SpanScores scores(nc::ParamStore& store, const ReaderExample& example) const;
    std::string answer(nc::ParamStore& store, const ReaderExample& example) const;

  private:
    ReaderConfig config_;
    SpanModel span_;
};

/// Answer-span NLL plus aux_weight times the title-span NLL. The auxiliary
/// term is dropped when the example has no title span or aux_weight is 0.
nc::Var reader_loss(const SpanOutput& output, const ReaderExample& example, double aux_weight);

std::vector<double> train_reader(const Reader& reader, nc::ParamStore& store,
                                 const std::vector<ReaderExample>& examples, const TrainOptions& options,
                                 const EpochCallback& on_epoch = {});

/// Deterministic two-way partition of question ids.
struct FoldSplit {
    std::array<std::vector<std::string>, 2> folds;

    /// 0 or 1; throws ValidationError for an unknown id.
    int fold_of(const std::string& qid) const;
};

FoldSplit split_folds(std::vector<std::string> question_ids, std::uint64_t seed);

struct ReaderTrainingSet {
    std::vector<ReaderExample> examples;
    std::vector<SkippedQuestion> skipped;
};

/// Builds reader examples from the passages chosen for each question (for
/// bridge questions, the cross-predicted ones). Gold answer spans come from
/// locate_answer; the title span marks the labeled answer passage.
ReaderTrainingSet build_reader_training_set(const std::vector<QARecord>& questions,
                                            const std::map<std::string, std::vector<const Passage*>>& passages,
                                            const LabelSet& labels, const Vocabulary& vocab,
                                            const ReaderConfig& config);

}  // namespace mhqa
