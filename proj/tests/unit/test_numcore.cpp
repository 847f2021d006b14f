#include <doctest.h>

#include <cmath>

#include "../support/grad_suite.hpp"
#include "../support/oracles.hpp"
#include "mhqa/errors.hpp"
#include "mhqa/nc/grad_check.hpp"
#include "mhqa/nc/graph.hpp"
#include "mhqa/nc/recurrent.hpp"
#include "mhqa/rng.hpp"

using namespace mhqa;
using namespace mhqa::nc;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
    Tensor t(r, c);
    for (auto& x : t.data()) {
        x = rng.uniform(-scale, scale);
    }
    return t;
}

void add_random(ParamStore& store, const std::string& name, std::size_t r, std::size_t c, Rng& rng) {
    store.add(name, random_tensor(r, c, rng));
}

void require_grad_check(const LossBuilder& build, ParamStore& store, double tol = 1e-4) {
    auto report = grad_check(build, store, {1e-5, tol});
    INFO(report.summary());
    CHECK(report.passed);
}

}  // namespace

TEST_CASE("softmax_rows analytic value and row sums") {
    Graph g;
    Var s = softmax_rows(g.constant(Tensor::row({0.0, std::log(2.0)})));
    CHECK(s.value()[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(s.value()[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        Var p = softmax_rows(g.constant(random_tensor(4, 1 + rng.below(7), rng, 30.0)));
        for (std::size_t i = 0; i < p.rows(); ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < p.cols(); ++j) {
                CHECK(p.value()(i, j) >= 0.0);
                sum += p.value()(i, j);
            }
            CHECK(std::abs(sum - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("masked softmax gives zero mass to masked entries") {
    Graph g;
    std::vector<char> mask = {1, 0, 1};
    Var s = softmax_rows(g.constant(Tensor::row({1.0, 100.0, 1.0})), &mask);
    CHECK(s.value()[1] == 0.0);
    CHECK(s.value()[0] == doctest::Approx(0.5));
    std::vector<char> none = {0, 0, 0};
    CHECK_THROWS_AS(softmax_rows(g.constant(Tensor::row({1.0, 2.0, 3.0})), &none), NumericError);
}

TEST_CASE("max_pool_over_time") {
    Graph g;
    Var one = max_pool_over_time(g.constant(Tensor::row({1.0, -2.0, 3.0})));
    CHECK(one.value() == Tensor::row({1.0, -2.0, 3.0}));

    Rng rng(5);
    Tensor m = random_tensor(6, 4, rng);
    const Tensor pooled = max_pool_over_time(g.constant(m)).value();
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::size_t> perm = {0, 1, 2, 3, 4, 5};
        rng.shuffle(perm.begin(), perm.end());
        Tensor shuffled(6, 4);
        for (std::size_t i = 0; i < 6; ++i) {
            for (std::size_t j = 0; j < 4; ++j) {
                shuffled(i, j) = m(perm[i], j);
            }
        }
        CHECK(max_pool_over_time(g.constant(shuffled)).value() == pooled);
    }
}

TEST_CASE("matmul agrees with a triple-loop reference") {
    Rng rng(11);
    Graph g;
    for (int trial = 0; trial < 10; ++trial) {
        Tensor a = random_tensor(2, 3, rng), b = random_tensor(3, 2, rng);
        Tensor got = matmul(g.constant(a), g.constant(b)).value();
        Tensor want = oracle::naive_matmul(a, b);
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-14));
        }
    }
}

TEST_CASE("shape errors name the operation") {
    Graph g;
    Var a = g.constant(Tensor(2, 3)), b = g.constant(Tensor(2, 3));
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("matmul"), ShapeError);
    CHECK_THROWS_WITH_AS(add(a, g.constant(Tensor(3, 2))), doctest::Contains("add"), ShapeError);
    CHECK_THROWS_WITH_AS(add_bias(a, g.constant(Tensor(1, 2))), doctest::Contains("add_bias"), ShapeError);
    CHECK_THROWS_WITH_AS(concat_cols({a, g.constant(Tensor(3, 1))}), doctest::Contains("concat_cols"), ShapeError);
}

TEST_CASE("dropout is identity with a keep-all mask and scales kept units") {
    Rng rng(1);
    Tensor keep_all = make_dropout_mask(3, 3, 0.0, rng);
    for (double m : keep_all.data()) {
        CHECK(m == 1.0);
    }
    Tensor mask = make_dropout_mask(50, 50, 0.2, rng);
    std::size_t zeros = 0;
    for (double m : mask.data()) {
        CHECK((m == 0.0 || m == doctest::Approx(1.25)));
        zeros += m == 0.0 ? 1 : 0;
    }
    CHECK(zeros > 350);
    CHECK(zeros < 650);
}

TEST_CASE("recurrent cells with zero parameters") {
    SUBCASE("gru") {
        Tensor w(2, 1), b(1, 1);
        Tensor h = gru_cell(Tensor::row({0.0}), Tensor::row({1.0}), {w, w, w, b, b, b});
        CHECK(h[0] == doctest::Approx(0.5));
    }
    SUBCASE("lstm") {
        Tensor w(2, 4), b(1, 4);
        auto s = lstm_cell(Tensor::row({0.0}), {Tensor::row({0.0}), Tensor::row({1.0})}, {w, b});
        CHECK(s.c[0] == doctest::Approx(0.5));
        CHECK(s.h[0] == doctest::Approx(0.5 * std::tanh(0.5)));
    }
    SUBCASE("dimension mismatch") {
        Tensor w(3, 1), b(1, 1);
        CHECK_THROWS_AS(gru_cell(Tensor::row({0.0}), Tensor::row({1.0}), {w, w, w, b, b, b}), ShapeError);
    }
}

TEST_CASE("random GRU step matches the scalar-loop reference") {
    Rng rng(17);
    const std::size_t in = 3, hid = 4;
    Tensor wz = random_tensor(in + hid, hid, rng), wr = random_tensor(in + hid, hid, rng),
           wh = random_tensor(in + hid, hid, rng), bz = random_tensor(1, hid, rng), br = random_tensor(1, hid, rng),
           bh = random_tensor(1, hid, rng);
    Tensor x = random_tensor(1, in, rng), h = random_tensor(1, hid, rng);
    Tensor got = gru_cell(x, h, {wz, wr, wh, bz, br, bh});
    auto want = oracle::scalar_gru_step(x.values(), h.values(), wz, wr, wh, bz, br, bh);
    for (std::size_t j = 0; j < hid; ++j) {
        CHECK(got[j] == doctest::Approx(want[j]).epsilon(1e-13));
    }
}

TEST_CASE("gru_sequence runs the cell over time in both directions") {
    Rng rng(19);
    const std::size_t in = 2, hid = 3, T = 4;
    ParamStore store;
    for (const char* n : {"wz", "wr", "wh"}) {
        add_random(store, n, in + hid, hid, rng);
    }
    for (const char* n : {"bz", "br", "bh"}) {
        add_random(store, n, 1, hid, rng);
    }
    Tensor x = random_tensor(T, in, rng);
    Graph g(&store);
    GruVars vars{g.param("wz"), g.param("wr"), g.param("wh"), g.param("bz"), g.param("br"), g.param("bh")};
    Tensor fw = gru_sequence(g.constant(x), vars, false).value();
    Tensor bw = gru_sequence(g.constant(x), vars, true).value();
    const GruWeights w{store.get("wz").value, store.get("wr").value, store.get("wh").value,
                       store.get("bz").value, store.get("br").value, store.get("bh").value};
    std::vector<double> h(hid, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        h = oracle::scalar_gru_step(std::vector<double>(x.row_span(t).begin(), x.row_span(t).end()), h, w.wz, w.wr,
                                    w.wh, w.bz, w.br, w.bh);
        for (std::size_t j = 0; j < hid; ++j) {
            CHECK(fw(t, j) == doctest::Approx(h[j]).epsilon(1e-13));
        }
    }
    h.assign(hid, 0.0);
    for (std::size_t t = T; t-- > 0;) {
        h = oracle::scalar_gru_step(std::vector<double>(x.row_span(t).begin(), x.row_span(t).end()), h, w.wz, w.wr,
                                    w.wh, w.bz, w.br, w.bh);
        for (std::size_t j = 0; j < hid; ++j) {
            CHECK(bw(t, j) == doctest::Approx(h[j]).epsilon(1e-13));
        }
    }
}

TEST_CASE("cross_entropy_from_logits") {
    Graph g;
    auto ce = [&](std::vector<double> logits, std::vector<std::size_t> gold) {
        return cross_entropy(g.constant(Tensor::row(std::move(logits))), gold).value()[0];
    };
    CHECK(ce({0.5, 0.5, 0.5, 0.5}, {2}) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(ce({1.0, -3.0, 2.0}, {0, 1, 2}) == doctest::Approx(0.0));
    CHECK(ce({2.0, 0.0, 0.0}, {0}) ==
          doctest::Approx(-std::log(std::exp(2.0) / (std::exp(2.0) + 2.0))).epsilon(1e-12));
    CHECK_THROWS_AS(ce({1.0, 2.0}, {}), ValidationError);
    CHECK_THROWS_AS(ce({1.0, 2.0}, {5}), ValidationError);
}

TEST_CASE("backward: linear sum matches finite differences, constants give zero") {
    Rng rng(23);
    ParamStore store;
    add_random(store, "W", 3, 2, rng);
    Tensor x = random_tensor(2, 1, rng);
    auto build = [&](Graph& g) { return sum_all(matmul(g.param("W"), g.constant(x))); };
    require_grad_check(build, store, 1e-6);
    // d/dW_ij sum(W x) = x_j.
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(store.get("W").grad(i, j) == doctest::Approx(x[j]));
        }
    }

    store.zero_grad();
    Graph g(&store);
    g.param("W");
    Var c = sum_all(g.constant(x));
    g.backward(c);
    for (double v : store.get("W").grad.data()) {
        CHECK(v == 0.0);
    }

    Graph g2(&store);
    CHECK_THROWS_AS(g2.backward(g2.param("W")), ShapeError);
}

TEST_CASE("every differentiable op, both recurrences and the model losses pass gradient check") {
    std::size_t checked = 0;
    oracle::full_grad_suite([&](const std::string& name, const GradCheckReport& report) {
        CAPTURE(name);
        INFO(report.summary());
        CHECK(report.passed);
        ++checked;
    });
    CHECK(checked > 25);
}

TEST_CASE("grad_check on a sigmoid-linear model and its failure detection") {
    Rng rng(37);
    ParamStore store;
    add_random(store, "W", 4, 1, rng);
    add_random(store, "b", 1, 1, rng);
    Tensor x = random_tensor(3, 4, rng);
    auto build = [&](Graph& g) {
        return sum_all(sigmoid(add_bias(matmul(g.constant(x), g.param("W")), g.param("b"))));
    };
    auto report = grad_check(build, store, {1e-5, 1e-6});
    CHECK(report.passed);
    CHECK(report.max_rel_error < 1e-6);

    // Doubling the analytic gradient must be flagged.
    store.scale_grad(2.0);
    auto corrupted = compare_gradients(build, store, {1e-5, 1e-4});
    CHECK_FALSE(corrupted.passed);
    CHECK(corrupted.failures() == 2);
}

TEST_CASE("adam_step") {
    ParamStore store;
    store.add("theta", Tensor::scalar(0.0));
    store.get("theta").grad[0] = 1.0;
    adam_step(store, {0.1, 0.9, 0.999, 1e-8});
    CHECK(store.get("theta").value[0] == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-12));

    ParamStore still;
    still.add("w", Tensor::row({1.0, 2.0}));
    adam_step(still);
    CHECK(still.get("w").value == Tensor::row({1.0, 2.0}));

    ParamStore bad;
    bad.add("a", Tensor::scalar(1.0));
    bad.add("z", Tensor::scalar(1.0));
    bad.get("z").grad[0] = NAN;
    bad.get("a").grad[0] = 1.0;
    CHECK_THROWS_WITH_AS(adam_step(bad), doctest::Contains("'z'"), NumericError);
    CHECK(bad.get("a").value[0] == 1.0);

    auto run = [] {
        Rng rng(41);
        ParamStore s;
        s.add_xavier("w", 3, 3, rng);
        for (int step = 0; step < 5; ++step) {
            s.zero_grad();
            Graph g(&s);
            Var loss = sum_all(tanh(matmul(g.param("w"), g.param("w"))));
            g.backward(loss);
            adam_step(s);
        }
        return s.get("w").value;
    };
    CHECK(run() == run());
}

TEST_CASE("tape replay is bitwise identical") {
    Rng rng(43);
    ParamStore store;
    add_random(store, "A", 4, 4, rng);
    auto once = [&] {
        Graph g(&store);
        Var v = softmax_rows(matmul(tanh(g.param("A")), g.param("A")));
        return v.value();
    };
    CHECK(once() == once());
}
