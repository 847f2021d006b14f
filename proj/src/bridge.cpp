#include "mhqa/bridge.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "mhqa/errors.hpp"
#include "mhqa/eval.hpp"
#include "mhqa/nc/recurrent.hpp"

namespace mhqa {

using nc::Graph;
using nc::Tensor;
using nc::Var;

const BridgeLabel* LabelSet::find(const std::string& qid) const {
    for (const auto& l : labels) {
        if (l.question_id == qid) {
            return &l;
        }
    }
    return nullptr;
}

LabelSet derive_bridge_labels(const std::vector<QARecord>& questions, const Corpus& corpus, std::uint64_t seed) {
    LabelSet out;
    for (const auto& q : questions) {
        if (q.qtype != QuestionType::bridge) {
            out.skipped.push_back({q.id, "not a bridge question"});
            continue;
        }
        if (!q.supporting_titles || q.supporting_titles->empty()) {
            out.skipped.push_back({q.id, "no supporting titles"});
            continue;
        }
        std::vector<std::string> qualifying;
        for (const auto& title : *q.supporting_titles) {
            const Passage* p = corpus.find_title(title);
            if (p != nullptr && contains_answer(p->text, q.answer) &&
                std::find(qualifying.begin(), qualifying.end(), title) == qualifying.end()) {
                qualifying.push_back(title);
            }
        }
        if (qualifying.empty()) {
            out.skipped.push_back({q.id, "answer not found in any supporting passage"});
            continue;
        }
        std::size_t pick = 0;
        if (qualifying.size() > 1) {
            Rng rng(mix_seed(seed, q.id));
            pick = static_cast<std::size_t>(rng.below(qualifying.size()));
        }
        out.labels.push_back({q.id, qualifying[pick]});
    }
    return out;
}

std::vector<BridgeCandidate> collect_candidates(const std::vector<const Passage*>& start_passages,
                                                const Corpus& corpus) {
    std::vector<BridgeCandidate> out;
    for (const Passage* p : start_passages) {
        for (const auto& a : p->anchors) {
            if (corpus.find_title(a.target_title) == nullptr) {
                continue;
            }
            BridgeCandidate c;
            c.mention = a;
            c.source_passage_id = p->id;
            c.target_title = a.target_title;
            out.push_back(std::move(c));
        }
    }
    return out;
}

namespace {

std::string strip_parenthetical(const std::string& title) {
    if (!title.empty() && title.back() == ')') {
        const auto open = title.rfind('(');
        if (open != std::string::npos && open > 0) {
            return title.substr(0, open);
        }
    }
    return title;
}

}  // namespace

ExactTitleLinker::ExactTitleLinker(const Corpus& corpus) {
    for (const auto& p : corpus.passages()) {
        auto toks = tokenize(strip_parenthetical(p.title)).tokens;
        if (!toks.empty()) {
            entries_.push_back({p.title, std::move(toks)});
        }
    }
}

std::vector<LinkedTitle> ExactTitleLinker::link(const std::string& question) const {
    const auto q = tokenize(question).tokens;
    const std::set<std::string> present(q.begin(), q.end());
    std::vector<LinkedTitle> out;
    for (const auto& e : entries_) {
        if (std::all_of(e.tokens.begin(), e.tokens.end(), [&](const std::string& t) { return present.count(t); })) {
            out.push_back({e.title, static_cast<double>(e.tokens.size())});
        }
    }
    std::sort(out.begin(), out.end(), [](const LinkedTitle& a, const LinkedTitle& b) {
        return a.score != b.score ? a.score > b.score : a.title < b.title;
    });
    return out;
}

std::vector<const Passage*> expand_with_entity_linking(const std::string& question,
                                                       const std::vector<const Passage*>& start,
                                                       const EntityLinker* linker, const Corpus& corpus,
                                                       std::size_t top_n, std::vector<std::string>* warnings) {
    std::vector<const Passage*> extra;
    if (linker == nullptr || top_n == 0) {
        return extra;
    }
    std::vector<LinkedTitle> linked;
    try {
        linked = linker->link(question);
    } catch (const std::exception& e) {
        if (warnings != nullptr) {
            warnings->push_back(std::string("entity linker failed: ") + e.what());
        }
        return extra;
    }
    std::set<const Passage*> seen(start.begin(), start.end());
    for (const auto& l : linked) {
        if (extra.size() >= top_n) {
            break;
        }
        const Passage* p = corpus.find_title(l.title);
        if (p != nullptr && seen.insert(p).second) {
            extra.push_back(p);
        }
    }
    return extra;
}

std::vector<RankedPassage> rank_answer_passages(const std::vector<BridgeCandidate>& candidates, std::size_t k) {
    std::map<std::string, double> best;
    for (const auto& c : candidates) {
        auto [it, inserted] = best.emplace(c.target_title, c.fused_score);
        if (!inserted) {
            it->second = std::max(it->second, c.fused_score);
        }
    }
    std::vector<RankedPassage> ranked;
    ranked.reserve(best.size());
    for (const auto& [title, score] : best) {
        ranked.push_back({title, score});
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const RankedPassage& a, const RankedPassage& b) { return a.score > b.score; });
    if (ranked.size() > k) {
        ranked.resize(k);
    }
    return ranked;
}

std::vector<std::string> titles_of(const std::vector<RankedPassage>& ranked) {
    std::vector<std::string> out;
    for (const auto& r : ranked) {
        out.push_back(r.title);
    }
    return out;
}

std::string to_string(BridgeVariant v) {
    switch (v) {
        case BridgeVariant::full:
            return "full";
        case BridgeVariant::no_context_evidence:
            return "no_context_evidence";
        case BridgeVariant::no_content_evidence:
            return "no_content_evidence";
    }
    return "full";
}

BridgeReasoner::BridgeReasoner(BridgeConfig config)
    : config_(config), span_("bridge.span", config.span, kEmbedding) {}

void BridgeReasoner::init_params(nc::ParamStore& store, const Vocabulary& vocab, const WordVectors* pretrained,
                                 Rng& rng) const {
    const std::size_t d = config_.span.embed_dim, a = config_.abstract_hidden;
    store.add(kEmbedding, init_embedding_matrix(vocab, d, pretrained, rng));
    span_.init_params(store, rng);
    for (const char* dir : {"fw", "bw"}) {
        store.add_xavier(std::string("bridge.abstract.") + dir + ".w", d + a, 4 * a, rng);
        Tensor bias(1, 4 * a);
        // Forget-gate bias of one, the usual LSTM starting point.
        for (std::size_t j = a; j < 2 * a; ++j) {
            bias[j] = 1.0;
        }
        store.add(std::string("bridge.abstract.") + dir + ".b", bias);
    }
    store.add_zeros("bridge.abstract.sentinel", 1, 2 * a);
    store.add_xavier("bridge.fuse.w", span_.state_dim() + 2 * a, 1, rng);
    store.add_zeros("bridge.fuse.b", 1, 1);
}

BridgeInstance BridgeReasoner::prepare(const std::string& question_id, const std::string& question,
                                       const std::vector<const Passage*>& start_passages, const Corpus& corpus,
                                       const Vocabulary& vocab) const {
    BridgeInstance inst;
    inst.question_id = question_id;
    inst.question_ids = vocab.ids(tokenize(question).tokens);
    inst.context = build_context(start_passages, false, config_.max_context_tokens);
    inst.context_ids = vocab.ids(inst.context.tokens);

    std::map<std::string, std::size_t> target_index;
    for (std::size_t b = 0; b < inst.context.blocks.size(); ++b) {
        const Passage* p = start_passages[b];
        for (auto& c : collect_candidates({p}, corpus)) {
            auto pos = inst.context.text_position(b, c.mention.token_start);
            if (!pos) {
                continue;  // anchor fell beyond the context cap
            }
            c.context_position = *pos;
            auto [it, inserted] = target_index.emplace(c.target_title, inst.targets.size());
            if (inserted) {
                inst.targets.push_back(c.target_title);
                inst.target_ids.push_back(vocab.ids(corpus.find_title(c.target_title)->text_tokens.tokens));
            }
            inst.candidate_target.push_back(it->second);
            inst.candidates.push_back(std::move(c));
        }
    }
    return inst;
}

Var BridgeReasoner::context_evidence(Graph& g, const BridgeInstance& inst, TrainContext* train) const {
    const std::size_t m = inst.candidates.size();
    if (config_.variant == BridgeVariant::no_context_evidence) {
        return g.constant(Tensor(m, span_.state_dim()));
    }
    EncodedSeq ctx = span_.encode(g, inst.context_ids, train);
    EncodedSeq q = span_.encode(g, inst.question_ids, train);
    EncodedSeq states = span_.self_attention(g, span_.project(g, span_.biattention(g, ctx, q)));
    std::vector<std::size_t> positions;
    positions.reserve(m);
    for (const auto& c : inst.candidates) {
        positions.push_back(c.context_position);
    }
    return nc::gather_rows(states.states, positions);
}

Var BridgeReasoner::content_evidence(Graph& g, const BridgeInstance& inst, TrainContext* train,
                                     std::vector<char>* missing) const {
    const std::size_t a = config_.abstract_hidden;
    if (missing != nullptr) {
        missing->assign(inst.targets.size(), 0);
    }
    if (config_.variant == BridgeVariant::no_content_evidence) {
        return g.constant(Tensor(inst.candidates.size(), 2 * a));
    }
    const nc::LstmVars fw{g.param("bridge.abstract.fw.w"), g.param("bridge.abstract.fw.b")};
    const nc::LstmVars bw{g.param("bridge.abstract.bw.w"), g.param("bridge.abstract.bw.b")};
    std::vector<Var> pooled;
    pooled.reserve(inst.targets.size());
    for (std::size_t t = 0; t < inst.targets.size(); ++t) {
        const auto& ids = inst.target_ids[t];
        if (ids.empty()) {
            pooled.push_back(g.param("bridge.abstract.sentinel"));
            if (missing != nullptr) {
                (*missing)[t] = 1;
            }
            continue;
        }
        Var x = nc::gather_rows(g.param(kEmbedding), ids);
        Var states = nc::concat_cols({nc::lstm_sequence(x, fw, false), nc::lstm_sequence(x, bw, true)});
        if (train != nullptr && train->rng != nullptr && train->dropout > 0.0) {
            states = nc::dropout(states,
                                 nc::make_dropout_mask(states.rows(), states.cols(), train->dropout, *train->rng));
        }
        pooled.push_back(nc::max_pool_over_time(states));
    }
    return nc::gather_rows(nc::concat_rows(pooled), inst.candidate_target);
}

Var BridgeReasoner::logits(Graph& g, const BridgeInstance& inst, TrainContext* train) const {
    if (inst.candidates.empty()) {
        throw ValidationError("bridge question " + inst.question_id + " has no anchor candidates");
    }
    Var hc = context_evidence(g, inst, train);
    Var hp = content_evidence(g, inst, train, nullptr);
    Var fused = nc::add_bias(nc::matmul(nc::concat_cols({hc, hp}), g.param("bridge.fuse.w")), g.param("bridge.fuse.b"));
    return nc::transpose(fused);
}

std::vector<BridgeCandidate> BridgeReasoner::score_bridges(nc::ParamStore& store, const BridgeInstance& inst) const {
    std::vector<BridgeCandidate> out = inst.candidates;
    if (out.empty()) {
        return out;
    }
    Graph g(&store);
    std::vector<char> missing;
    Var hc = context_evidence(g, inst, nullptr);
    Var hp = content_evidence(g, inst, nullptr, &missing);
    Var fused = nc::add_bias(nc::matmul(nc::concat_cols({hc, hp}), g.param("bridge.fuse.w")), g.param("bridge.fuse.b"));
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto c = hc.value().row_span(i);
        const auto p = hp.value().row_span(i);
        out[i].h_context.assign(c.begin(), c.end());
        out[i].h_content.assign(p.begin(), p.end());
        out[i].fused_score = fused.value()(i, 0);
        out[i].missing_abstract = !missing.empty() && missing[inst.candidate_target[i]] != 0;
    }
    return out;
}

std::vector<std::size_t> gold_candidates(const std::vector<BridgeCandidate>& candidates,
                                         const std::string& gold_title) {
    std::vector<std::size_t> gold;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (candidates[i].target_title == gold_title) {
            gold.push_back(i);
        }
    }
    return gold;
}

Var bridge_loss(Var logits, const std::vector<BridgeCandidate>& candidates, const std::string& gold_title) {
    const auto gold = gold_candidates(candidates, gold_title);
    if (gold.empty()) {
        throw ValidationError("gold bridge '" + gold_title + "' is not among the candidates");
    }
    if (logits.cols() != candidates.size()) {
        throw ShapeError("bridge_loss: " + std::to_string(logits.cols()) + " logits for " +
                         std::to_string(candidates.size()) + " candidates");
    }
    return nc::cross_entropy(logits, gold);
}

std::vector<double> train_bridge(const BridgeReasoner& reasoner, nc::ParamStore& store,
                                 const std::vector<BridgeExample>& examples, const TrainOptions& options,
                                 const EpochCallback& on_epoch) {
    return train_loop(
        store, examples.size(), options,
        [&](Graph& g, std::size_t i, TrainContext* train) {
            const auto& ex = examples[i];
            return bridge_loss(reasoner.logits(g, ex.instance, train), ex.instance.candidates, ex.gold_title);
        },
        on_epoch);
}

}  // namespace mhqa
