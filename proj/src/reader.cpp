#include "mhqa/reader.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mhqa/errors.hpp"
#include "mhqa/eval.hpp"

namespace mhqa {

using nc::Graph;
using nc::Var;

SpanChoice best_span(const SpanScores& scores, std::size_t max_len) {
    const std::size_t n = std::min(scores.start_logits.size(), scores.end_logits.size());
    SpanChoice best;
    bool found = false;
    for (std::size_t s = 0; s < n; ++s) {
        if (!std::isfinite(scores.start_logits[s])) {
            continue;
        }
        const std::size_t limit = std::min(n, s + max_len);
        for (std::size_t e = s; e < limit; ++e) {
            const double v = scores.start_logits[s] + scores.end_logits[e];
            if (!std::isfinite(v)) {
                continue;
            }
            if (!found || v > best.score) {
                best = {s, e, v};
                found = true;
            }
        }
    }
    if (!found) {
        throw ValidationError("no valid answer span");
    }
    return best;
}

std::string decode_answer(const SpanScores& scores, const Context& context, std::size_t max_len) {
    if (context.empty()) {
        throw ValidationError("decode_answer: empty context");
    }
    const SpanChoice c = best_span(scores, max_len);
    return context.slice(c.start, c.end);
}

std::optional<TokenSpan> locate_answer(const Context& context, const std::string& answer, std::size_t max_len) {
    const std::string target = normalize_answer(answer);
    if (target.empty()) {
        return std::nullopt;
    }
    for (std::size_t s = 0; s < context.num_sentinels; ++s) {
        if (context.tokens[s] == target) {
            return TokenSpan{s, s};
        }
    }
    // Boundary tokens that normalize away (articles) are never part of the
    // gold span, so "a violin" yields just "violin".
    auto content = [&](std::size_t i) { return !answer_tokens(context.tokens[i]).empty(); };
    for (std::size_t s = context.num_sentinels; s < context.size(); ++s) {
        if (!content(s)) {
            continue;
        }
        const std::size_t limit = std::min(context.size(), s + max_len);
        for (std::size_t e = s; e < limit; ++e) {
            if (content(e) && normalize_answer(context.slice(s, e)) == target) {
                return TokenSpan{s, e};
            }
        }
    }
    return std::nullopt;
}

std::optional<TokenSpan> locate_title(const Context& context, const std::string& title) {
    for (const auto& b : context.blocks) {
        if (b.title == title && b.title_end > b.title_begin) {
            return TokenSpan{b.title_begin, b.title_end - 1};
        }
    }
    return std::nullopt;
}

ReaderExample make_reader_example(const std::string& question_id, const std::string& question,
                                  const std::vector<const Passage*>& passages, const Vocabulary& vocab,
                                  std::size_t max_context_tokens) {
    ReaderExample ex;
    ex.question_id = question_id;
    ex.question_ids = vocab.ids(tokenize(question).tokens);
    ex.context = build_context(passages, true, max_context_tokens);
    ex.context_ids = vocab.ids(ex.context.tokens);
    for (const auto& b : ex.context.blocks) {
        ex.passages.push_back(b.title);
    }
    return ex;
}

Reader::Reader(ReaderConfig config) : config_(config), span_("reader.span", config.span, kEmbedding) {}

void Reader::init_params(nc::ParamStore& store, const Vocabulary& vocab, const WordVectors* pretrained,
                         Rng& rng) const {
    store.add(kEmbedding, init_embedding_matrix(vocab, config_.span.embed_dim, pretrained, rng));
    span_.init_params(store, rng);
}

SpanOutput Reader::forward(Graph& g, const ReaderExample& example, TrainContext* train) const {
    return span_.forward(g, example.context_ids, example.question_ids, train);
}

SpanScores Reader::scores(nc::ParamStore& store, const ReaderExample& example) const {
    Graph g(&store);
    return forward(g, example).scores();
}

std::string Reader::answer(nc::ParamStore& store, const ReaderExample& example) const {
    return decode_answer(scores(store, example), example.context, config_.max_span_len);
}

Var reader_loss(const SpanOutput& output, const ReaderExample& example, double aux_weight) {
    if (!example.answer_span) {
        throw ValidationError("reader example " + example.question_id + " has no gold answer span");
    }
    Var loss = span_nll_loss(output, example.answer_span->first, example.answer_span->second);
    if (aux_weight != 0.0 && example.title_span) {
        Var aux = span_nll_loss(output, example.title_span->first, example.title_span->second);
        loss = nc::add(loss, nc::scale(aux, aux_weight));
    }
    return loss;
}

std::vector<double> train_reader(const Reader& reader, nc::ParamStore& store,
                                 const std::vector<ReaderExample>& examples, const TrainOptions& options,
                                 const EpochCallback& on_epoch) {
    return train_loop(
        store, examples.size(), options,
        [&](Graph& g, std::size_t i, TrainContext* train) {
            return reader_loss(reader.forward(g, examples[i], train), examples[i], reader.config().aux_weight);
        },
        on_epoch);
}

int FoldSplit::fold_of(const std::string& qid) const {
    for (int f = 0; f < 2; ++f) {
        if (std::find(folds[f].begin(), folds[f].end(), qid) != folds[f].end()) {
            return f;
        }
    }
    throw ValidationError("question " + qid + " is in neither fold");
}

FoldSplit split_folds(std::vector<std::string> question_ids, std::uint64_t seed) {
    // Sort first so the split depends only on the id set, not file order.
    std::sort(question_ids.begin(), question_ids.end());
    question_ids.erase(std::unique(question_ids.begin(), question_ids.end()), question_ids.end());
    Rng rng(mix_seed(seed, "folds"));
    rng.shuffle(question_ids.begin(), question_ids.end());
    FoldSplit split;
    const std::size_t half = (question_ids.size() + 1) / 2;
    split.folds[0].assign(question_ids.begin(), question_ids.begin() + static_cast<std::ptrdiff_t>(half));
    split.folds[1].assign(question_ids.begin() + static_cast<std::ptrdiff_t>(half), question_ids.end());
    std::sort(split.folds[0].begin(), split.folds[0].end());
    std::sort(split.folds[1].begin(), split.folds[1].end());
    return split;
}

ReaderTrainingSet build_reader_training_set(const std::vector<QARecord>& questions,
                                            const std::map<std::string, std::vector<const Passage*>>& passages,
                                            const LabelSet& labels, const Vocabulary& vocab,
                                            const ReaderConfig& config) {
    ReaderTrainingSet out;
    for (const auto& q : questions) {
        auto it = passages.find(q.id);
        if (it == passages.end() || it->second.empty()) {
            out.skipped.push_back({q.id, "no passages for question"});
            continue;
        }
        ReaderExample ex = make_reader_example(q.id, q.question, it->second, vocab, config.max_context_tokens);
        ex.answer_span = locate_answer(ex.context, q.answer, config.max_span_len);
        if (!ex.answer_span) {
            out.skipped.push_back({q.id, "answer not found in context"});
            continue;
        }
        if (const BridgeLabel* label = labels.find(q.id)) {
            ex.title_span = locate_title(ex.context, label->gold_title);
        }
        out.examples.push_back(std::move(ex));
    }
    return out;
}

}  // namespace mhqa
