#include <doctest.h>

#include <cmath>

#include "mhqa/errors.hpp"
#include "mhqa/nc/grad_check.hpp"
#include "mhqa/span_model.hpp"

using namespace mhqa;
using namespace mhqa::nc;

namespace {

struct Fixture {
    ParamStore store;
    SpanModel model;

    explicit Fixture(std::size_t vocab = 12, SpanModelConfig cfg = {3, 2, 0.0}, std::uint64_t seed = 7)
        : model("m", cfg, "emb") {
        Rng rng(seed);
        Tensor emb(vocab, cfg.embed_dim);
        for (auto& x : emb.data()) {
            x = rng.uniform(-1.0, 1.0);
        }
        store.add("emb", emb);
        model.init_params(store, rng);
        // Non-zero biases so their gradients are exercised.
        for (const auto& n : store.names()) {
            if (n.ends_with(".b") || n.ends_with("bz") || n.ends_with("br") || n.ends_with("bh")) {
                for (auto& x : store.get(n).value.data()) {
                    x = rng.uniform(-0.3, 0.3);
                }
            }
        }
    }

    void zero(const std::string& name) { store.get(name).value.fill(0.0); }
};

}  // namespace

TEST_CASE("encode produces T x 2h states and rejects empty input") {
    Fixture f;
    Graph g(&f.store);
    auto enc = f.model.encode(g, {1, 2, 3, 4, 5});
    CHECK(enc.states.rows() == 5);
    CHECK(enc.states.cols() == 4);
    CHECK(enc.mask == std::vector<char>(5, 1));
    CHECK_THROWS_AS(f.model.encode(g, {}), ValidationError);
}

TEST_CASE("with tied directions, reversing the input mirrors the two halves") {
    Fixture f;
    for (const char* leaf : {"wz", "wr", "wh", "bz", "br", "bh"}) {
        f.store.get(std::string("m.gru.bw.") + leaf).value = f.store.get(std::string("m.gru.fw.") + leaf).value;
    }
    Graph g(&f.store);
    const std::vector<std::size_t> ids = {3, 1, 4, 1, 5};
    const std::vector<std::size_t> rev(ids.rbegin(), ids.rend());
    Tensor a = f.model.encode(g, ids).states.value();
    Tensor b = f.model.encode(g, rev).states.value();
    const std::size_t T = ids.size(), h = 2;
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < h; ++j) {
            CHECK(a(t, j) == doctest::Approx(b(T - 1 - t, h + j)).epsilon(1e-13));
        }
    }
}

TEST_CASE("biattention with zero similarity weights averages the question") {
    Fixture f;
    f.zero("m.att.w1");
    f.zero("m.att.w2");
    f.zero("m.att.w3");
    Graph g(&f.store);
    Tensor Hv = Tensor::from_rows({{1, 2, 3, 4}, {0, 1, 0, 1}});
    Tensor Uv = Tensor::from_rows({{2, 0, 2, 0}, {0, 4, 0, 4}, {1, 1, 1, 1}});
    EncodedSeq H{g.constant(Hv), {1, 1}}, U{g.constant(Uv), {1, 1, 1}};
    Tensor G = f.model.biattention(g, H, U).states.value();
    REQUIRE(G.cols() == 16);
    const std::vector<double> mean = {1.0, 5.0 / 3.0, 1.0, 5.0 / 3.0};
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(G(i, j) == Hv(i, j));
            CHECK(G(i, 4 + j) == doctest::Approx(mean[j]));
            CHECK(G(i, 8 + j) == doctest::Approx(Hv(i, j) * mean[j]));
            // Uniform question-to-context weights give the mean context row.
            CHECK(G(i, 12 + j) == doctest::Approx(Hv(i, j) * (Hv(0, j) + Hv(1, j)) / 2.0));
        }
    }
}

TEST_CASE("biattention with a single question token copies it") {
    Fixture f;
    Graph g(&f.store);
    Tensor Uv = Tensor::from_rows({{0.5, -1, 2, 0.25}});
    EncodedSeq H{g.constant(Tensor::from_rows({{1, 1, 1, 1}, {2, 0, 1, 3}, {0, 0, 1, 1}})), {1, 1, 1}};
    EncodedSeq U{g.constant(Uv), {1}};
    Tensor G = f.model.biattention(g, H, U).states.value();
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(G(i, 4 + j) == doctest::Approx(Uv(0, j)));
        }
    }
}

TEST_CASE("biattention against a hand-computed two-token example") {
    Fixture f;
    f.store.get("m.att.w1").value.fill(0.0);
    f.store.get("m.att.w2").value.fill(0.0);
    f.store.get("m.att.w3").value = Tensor::row({1, 0, 0, 0});
    Graph g(&f.store);
    Tensor Hv = Tensor::from_rows({{1, 0, 0, 0}, {0, 0, 0, 0}});
    Tensor Uv = Tensor::from_rows({{std::log(3.0), 0, 0, 0}, {0, 1, 0, 0}});
    EncodedSeq H{g.constant(Hv), {1, 1}}, U{g.constant(Uv), {1, 1}};
    Tensor G = f.model.biattention(g, H, U).states.value();
    // Row 0 sees similarities [ln 3, 0] -> weights [3/4, 1/4].
    CHECK(G(0, 4) == doctest::Approx(0.75 * std::log(3.0)));
    CHECK(G(0, 5) == doctest::Approx(0.25));
    // Row 1 sees [0, 0] -> uniform.
    CHECK(G(1, 4) == doctest::Approx(0.5 * std::log(3.0)));
    CHECK(G(1, 5) == doctest::Approx(0.5));
    // Row maxima [ln 3, 0] -> context weights [3/4, 1/4]; h~ = [3/4, 0, 0, 0].
    CHECK(G(0, 12) == doctest::Approx(0.75));
    CHECK(G(1, 12) == doctest::Approx(0.0));
}

TEST_CASE("self-attention") {
    Fixture f;
    SUBCASE("single token is unchanged") {
        Graph g(&f.store);
        EncodedSeq x{g.constant(Tensor::row({1, 2, 3, 4})), {1}};
        CHECK(f.model.self_attention(g, x).states.value() == Tensor::row({1, 2, 3, 4}));
    }
    SUBCASE("hand example with three tokens and no mixing weights") {
        f.zero("m.self.w1");
        f.zero("m.self.w2");
        f.zero("m.self.w3");
        f.zero("m.self.mix.w");
        f.store.get("m.self.mix.b").value = Tensor::row({1, -1, 0.5, 0});
        Graph g(&f.store);
        Tensor X = Tensor::from_rows({{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}});
        Tensor out = f.model.self_attention(g, {g.constant(X), {1, 1, 1}}).states.value();
        // Mixing reduces to relu(bias) and is added to every row.
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(out(i, 0) == doctest::Approx(X(i, 0) + 1.0));
            CHECK(out(i, 1) == doctest::Approx(X(i, 1)));
            CHECK(out(i, 2) == doctest::Approx(X(i, 2) + 0.5));
        }
    }
    SUBCASE("attention never looks at the diagonal") {
        f.zero("m.self.w1");
        f.zero("m.self.w2");
        f.zero("m.self.w3");
        f.store.get("m.self.mix.b").value.fill(0.0);
        Tensor& mw = f.store.get("m.self.mix.w").value;
        mw.fill(0.0);
        // Route the attended vector (second block) straight through.
        for (std::size_t j = 0; j < 4; ++j) {
            mw(4 + j, j) = 1.0;
        }
        Graph g(&f.store);
        Tensor X = Tensor::from_rows({{1, 0, 0, 0}, {0, 2, 0, 0}, {0, 0, 4, 0}});
        Tensor out = f.model.self_attention(g, {g.constant(X), {1, 1, 1}}).states.value();
        // Row 0 averages rows 1 and 2.
        CHECK(out(0, 0) == doctest::Approx(1.0));
        CHECK(out(0, 1) == doctest::Approx(1.0));
        CHECK(out(0, 2) == doctest::Approx(2.0));
    }
}

TEST_CASE("span heads mask padded positions") {
    Fixture f;
    Graph g(&f.store);
    EncodedSeq x{g.constant(Tensor::from_rows({{1, 2, 3, 4}, {0, 1, 0, 1}, {5, 5, 5, 5}})), {1, 1, 0}};
    auto scores = f.model.span_heads(g, x).scores();
    REQUIRE(scores.start_logits.size() == 3);
    CHECK(std::isinf(scores.start_logits[2]));
    CHECK(std::isinf(scores.end_logits[2]));
    CHECK(std::isfinite(scores.start_logits[0]));
}

TEST_CASE("span_nll_loss validation and value") {
    Fixture f;
    Graph g(&f.store);
    auto out = f.model.forward(g, {1, 2, 3, 4}, {5, 6});
    CHECK_THROWS_AS(span_nll_loss(out, 2, 1), ValidationError);
    CHECK_THROWS_AS(span_nll_loss(out, 0, 9), ValidationError);
    auto s = out.scores();
    const double want = cross_entropy_value(s.start_logits, {1}) + cross_entropy_value(s.end_logits, {2});
    CHECK(span_nll_loss(out, 1, 2).value()[0] == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("shifting all start logits leaves the loss unchanged") {
    Fixture f;
    auto loss_value = [&] {
        Graph g(&f.store);
        return span_nll_loss(f.model.forward(g, {1, 2, 3, 4, 5}, {6, 7}), 1, 3).value()[0];
    };
    const double before = loss_value();
    f.store.get("m.start.b").value[0] += 3.5;
    f.store.get("m.end.b").value[0] -= 2.0;
    CHECK(loss_value() == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("end-to-end span model gradients match finite differences") {
    Fixture f(10, {3, 2, 0.0}, 13);
    const std::vector<std::size_t> ctx = {1, 2, 3, 4, 5, 6}, q = {7, 8, 2};
    auto build = [&](Graph& g) { return span_nll_loss(f.model.forward(g, ctx, q), 2, 4); };
    auto report = grad_check(build, f.store, {1e-5, 1e-4});
    INFO(report.summary());
    CHECK(report.passed);
}

TEST_CASE("dropout only applies when a training context is supplied") {
    Fixture f(12, {3, 2, 0.5});
    Graph g(&f.store);
    Tensor plain = f.model.encode(g, {1, 2, 3}).states.value();
    Rng rng(1);
    TrainContext train{&rng, 0.5};
    Tensor dropped = f.model.encode(g, {1, 2, 3}, &train).states.value();
    CHECK(f.model.encode(g, {1, 2, 3}).states.value() == plain);
    CHECK_FALSE(dropped == plain);
}
