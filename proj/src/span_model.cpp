#include "mhqa/span_model.hpp"

#include <limits>

#include "mhqa/errors.hpp"
#include "mhqa/nc/recurrent.hpp"

namespace mhqa {

using nc::Graph;
using nc::Tensor;
using nc::Var;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<double> row_values(Var v) { return v.value().values(); }

Var ones(Graph& g, std::size_t rows, std::size_t cols) { return g.constant(Tensor(rows, cols, 1.0)); }

struct Trilinear {
    Var w1, w2, w3;
};

// S_ij = w1 . a_i + w2 . b_j + w3 . (a_i * b_j), built from explicit-shape ops.
Var trilinear_similarity(Graph& g, Var a, Var b, const Trilinear& w) {
    const std::size_t n = a.rows(), m = b.rows();
    Var left = nc::matmul(nc::matmul(a, w.w1), ones(g, 1, m));
    Var right = nc::matmul(ones(g, n, 1), nc::transpose(nc::matmul(b, w.w2)));
    Var cross = nc::matmul(nc::mul(a, nc::repeat_rows(w.w3, n)), nc::transpose(b));
    return nc::add(nc::add(left, right), cross);
}

}  // namespace

SpanScores SpanOutput::scores() const { return {row_values(start_logits), row_values(end_logits)}; }

SpanModel::SpanModel(std::string prefix, SpanModelConfig config, std::string embedding_param)
    : prefix_(std::move(prefix)), config_(config), embedding_param_(std::move(embedding_param)) {}

void SpanModel::init_params(nc::ParamStore& store, Rng& rng) const {
    const std::size_t d = config_.embed_dim, h = config_.hidden, s = 2 * h;
    for (const char* dir : {"gru.fw", "gru.bw"}) {
        const std::string base = std::string(dir) + ".";
        store.add_xavier(name(base + "wz"), d + h, h, rng);
        store.add_xavier(name(base + "wr"), d + h, h, rng);
        store.add_xavier(name(base + "wh"), d + h, h, rng);
        store.add_zeros(name(base + "bz"), 1, h);
        store.add_zeros(name(base + "br"), 1, h);
        store.add_zeros(name(base + "bh"), 1, h);
    }
    store.add_xavier(name("att.w1"), s, 1, rng);
    store.add_xavier(name("att.w2"), s, 1, rng);
    store.add_xavier(name("att.w3"), 1, s, rng);
    store.add_xavier(name("proj.w"), 4 * s, s, rng);
    store.add_zeros(name("proj.b"), 1, s);
    store.add_xavier(name("self.w1"), s, 1, rng);
    store.add_xavier(name("self.w2"), s, 1, rng);
    store.add_xavier(name("self.w3"), 1, s, rng);
    store.add_xavier(name("self.mix.w"), 3 * s, s, rng);
    store.add_zeros(name("self.mix.b"), 1, s);
    store.add_xavier(name("start.w"), s, 1, rng);
    store.add_zeros(name("start.b"), 1, 1);
    store.add_xavier(name("end.w"), s, 1, rng);
    store.add_zeros(name("end.b"), 1, 1);
}

Var SpanModel::embed(Graph& g, const std::vector<std::size_t>& token_ids) const {
    if (token_ids.empty()) {
        throw ValidationError("cannot encode an empty token sequence");
    }
    return nc::gather_rows(g.param(embedding_param_), token_ids);
}

EncodedSeq SpanModel::encode(Graph& g, const std::vector<std::size_t>& token_ids, TrainContext* train) const {
    Var x = embed(g, token_ids);
    auto gru = [&](const std::string& dir) {
        return nc::GruVars{g.param(name(dir + ".wz")), g.param(name(dir + ".wr")), g.param(name(dir + ".wh")),
                           g.param(name(dir + ".bz")), g.param(name(dir + ".br")), g.param(name(dir + ".bh"))};
    };
    Var fw = nc::gru_sequence(x, gru("gru.fw"), false);
    Var bw = nc::gru_sequence(x, gru("gru.bw"), true);
    Var states = nc::concat_cols({fw, bw});
    if (train != nullptr && train->rng != nullptr && train->dropout > 0.0) {
        states = nc::dropout(states, nc::make_dropout_mask(states.rows(), states.cols(), train->dropout, *train->rng));
    }
    return {states, std::vector<char>(token_ids.size(), 1)};
}

EncodedSeq SpanModel::biattention(Graph& g, const EncodedSeq& context, const EncodedSeq& question) const {
    Var H = context.states;
    Var U = question.states;
    if (H.cols() != state_dim() || U.cols() != state_dim()) {
        throw ShapeError("biattention: expected state width " + std::to_string(state_dim()) + ", got " +
                         H.value().shape_string() + " and " + U.value().shape_string());
    }
    const std::size_t T = H.rows(), J = U.rows();
    Var S = trilinear_similarity(g, H, U, {g.param(name("att.w1")), g.param(name("att.w2")), g.param(name("att.w3"))});

    // Context-to-question: each context position attends over the question.
    std::vector<char> qmask(T * J);
    for (std::size_t i = 0; i < T; ++i) {
        for (std::size_t j = 0; j < J; ++j) {
            qmask[i * J + j] = question.mask[j];
        }
    }
    Var c2q = nc::matmul(nc::softmax_rows(S, &qmask), U);

    // Question-to-context: attend over context positions by their best match.
    Var best = nc::mask_fill(nc::max_cols(nc::mask_fill(S, qmask, kNegInf)), context.mask, kNegInf);
    Var q2c_weights = nc::softmax_rows(nc::transpose(best), &context.mask);
    Var q2c = nc::repeat_rows(nc::matmul(q2c_weights, H), T);

    Var out = nc::concat_cols({H, c2q, nc::mul(H, c2q), nc::mul(H, q2c)});
    return {out, context.mask};
}

EncodedSeq SpanModel::project(Graph& g, const EncodedSeq& attended) const {
    Var p = nc::relu(nc::add_bias(nc::matmul(attended.states, g.param(name("proj.w"))), g.param(name("proj.b"))));
    return {p, attended.mask};
}

EncodedSeq SpanModel::self_attention(Graph& g, const EncodedSeq& context) const {
    const std::size_t T = context.length();
    if (T <= 1) {
        return context;
    }
    Var X = context.states;
    Var S = trilinear_similarity(g, X, X, {g.param(name("self.w1")), g.param(name("self.w2")), g.param(name("self.w3"))});
    std::vector<char> mask(T * T);
    bool any_row_empty = false;
    for (std::size_t i = 0; i < T; ++i) {
        bool any = false;
        for (std::size_t j = 0; j < T; ++j) {
            mask[i * T + j] = (i != j && context.mask[j]) ? 1 : 0;
            any = any || mask[i * T + j];
        }
        any_row_empty = any_row_empty || !any;
    }
    if (any_row_empty) {
        // Only one valid position: nothing to attend to.
        return context;
    }
    Var attended = nc::matmul(nc::softmax_rows(S, &mask), X);
    Var mixed = nc::relu(nc::add_bias(nc::matmul(nc::concat_cols({X, attended, nc::mul(X, attended)}),
                                                 g.param(name("self.mix.w"))),
                                      g.param(name("self.mix.b"))));
    return {nc::add(X, mixed), context.mask};
}

SpanOutput SpanModel::span_heads(Graph& g, const EncodedSeq& context) const {
    auto head = [&](const std::string& which) {
        Var logits = nc::transpose(
            nc::add_bias(nc::matmul(context.states, g.param(name(which + ".w"))), g.param(name(which + ".b"))));
        return nc::mask_fill(logits, context.mask, kNegInf);
    };
    return {context, head("start"), head("end")};
}

SpanOutput SpanModel::forward(Graph& g, const std::vector<std::size_t>& context_ids,
                              const std::vector<std::size_t>& question_ids, TrainContext* train) const {
    EncodedSeq ctx = encode(g, context_ids, train);
    EncodedSeq q = encode(g, question_ids, train);
    EncodedSeq att = project(g, biattention(g, ctx, q));
    return span_heads(g, self_attention(g, att));
}

Var span_nll_loss(const SpanOutput& output, std::size_t gold_start, std::size_t gold_end) {
    if (gold_start > gold_end) {
        throw ValidationError("span_nll_loss: gold start " + std::to_string(gold_start) + " after end " +
                              std::to_string(gold_end));
    }
    const auto& mask = output.final_states.mask;
    if (gold_end >= mask.size() || !mask[gold_start] || !mask[gold_end]) {
        throw ValidationError("span_nll_loss: gold span [" + std::to_string(gold_start) + ", " +
                              std::to_string(gold_end) + "] lies on a masked or missing position");
    }
    return nc::add(nc::cross_entropy(output.start_logits, {gold_start}),
                   nc::cross_entropy(output.end_logits, {gold_end}));
}

}  // namespace mhqa
