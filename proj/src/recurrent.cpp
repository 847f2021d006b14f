#include "mhqa/nc/recurrent.hpp"

#include <cmath>
#include <string>

#include "mhqa/errors.hpp"

namespace mhqa::nc {

namespace {

double sig(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// out[j] += sum_i v[i] * W(row_offset + i, col_offset + j) for j < n.
void vecmat_acc(const double* v, std::size_t len, const Tensor& W, std::size_t row_offset,
                std::size_t col_offset, std::size_t n, double* out) {
    for (std::size_t i = 0; i < len; ++i) {
        const double vi = v[i];
        if (vi == 0.0) {
            continue;
        }
        const double* wrow = &W(row_offset + i, col_offset);
        for (std::size_t j = 0; j < n; ++j) {
            out[j] += vi * wrow[j];
        }
    }
}

// out[i] += sum_j g[j] * W(row_offset + i, col_offset + j) for i < len.
void matvec_t_acc(const double* g, std::size_t n, const Tensor& W, std::size_t row_offset,
                  std::size_t col_offset, std::size_t len, double* out) {
    for (std::size_t i = 0; i < len; ++i) {
        const double* wrow = &W(row_offset + i, col_offset);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            s += g[j] * wrow[j];
        }
        out[i] += s;
    }
}

// dW(row_offset + i, col_offset + j) += v[i] * g[j].
void outer_acc(const double* v, std::size_t len, const double* g, std::size_t n, Tensor& dW,
               std::size_t row_offset, std::size_t col_offset) {
    for (std::size_t i = 0; i < len; ++i) {
        const double vi = v[i];
        if (vi == 0.0) {
            continue;
        }
        double* drow = &dW(row_offset + i, col_offset);
        for (std::size_t j = 0; j < n; ++j) {
            drow[j] += vi * g[j];
        }
    }
}

void check_gru(std::size_t in, std::size_t hidden, const Tensor& wz, const Tensor& wr,
               const Tensor& wh, const Tensor& bz, const Tensor& br, const Tensor& bh) {
    for (const Tensor* w : {&wz, &wr, &wh}) {
        if (w->rows() != in + hidden || w->cols() != hidden) {
            throw ShapeError("gru: weight " + w->shape_string() + " incompatible with input width " +
                             std::to_string(in) + " and hidden size " + std::to_string(hidden));
        }
    }
    for (const Tensor* b : {&bz, &br, &bh}) {
        if (b->rows() != 1 || b->cols() != hidden) {
            throw ShapeError("gru: bias " + b->shape_string() + " incompatible with hidden size " +
                             std::to_string(hidden));
        }
    }
}

void check_lstm(std::size_t in, std::size_t hidden, const Tensor& w, const Tensor& b) {
    if (w.rows() != in + hidden || w.cols() != 4 * hidden) {
        throw ShapeError("lstm: weight " + w.shape_string() + " incompatible with input width " +
                         std::to_string(in) + " and hidden size " + std::to_string(hidden));
    }
    if (b.rows() != 1 || b.cols() != 4 * hidden) {
        throw ShapeError("lstm: bias " + b.shape_string() + " incompatible with hidden size " +
                         std::to_string(hidden));
    }
}

struct GruStepOut {
    std::vector<double> z, r, cand, h;
};

GruStepOut gru_forward_step(const double* x, std::size_t in, const double* h, std::size_t hidden,
                            const Tensor& wz, const Tensor& wr, const Tensor& wh, const Tensor& bz,
                            const Tensor& br, const Tensor& bh) {
    GruStepOut s;
    s.z.assign(bz.data().begin(), bz.data().end());
    s.r.assign(br.data().begin(), br.data().end());
    s.cand.assign(bh.data().begin(), bh.data().end());
    vecmat_acc(x, in, wz, 0, 0, hidden, s.z.data());
    vecmat_acc(h, hidden, wz, in, 0, hidden, s.z.data());
    vecmat_acc(x, in, wr, 0, 0, hidden, s.r.data());
    vecmat_acc(h, hidden, wr, in, 0, hidden, s.r.data());
    std::vector<double> rh(hidden);
    for (std::size_t j = 0; j < hidden; ++j) {
        s.z[j] = sig(s.z[j]);
        s.r[j] = sig(s.r[j]);
        rh[j] = s.r[j] * h[j];
    }
    vecmat_acc(x, in, wh, 0, 0, hidden, s.cand.data());
    vecmat_acc(rh.data(), hidden, wh, in, 0, hidden, s.cand.data());
    s.h.resize(hidden);
    for (std::size_t j = 0; j < hidden; ++j) {
        s.cand[j] = std::tanh(s.cand[j]);
        s.h[j] = s.z[j] * h[j] + (1.0 - s.z[j]) * s.cand[j];
    }
    return s;
}

struct LstmStepOut {
    std::vector<double> gates;  // activated [i, f, g, o]
    std::vector<double> c, h;
};

LstmStepOut lstm_forward_step(const double* x, std::size_t in, const double* h, const double* c,
                              std::size_t hidden, const Tensor& w, const Tensor& b) {
    LstmStepOut s;
    s.gates.assign(b.data().begin(), b.data().end());
    vecmat_acc(x, in, w, 0, 0, 4 * hidden, s.gates.data());
    vecmat_acc(h, hidden, w, in, 0, 4 * hidden, s.gates.data());
    s.c.resize(hidden);
    s.h.resize(hidden);
    for (std::size_t j = 0; j < hidden; ++j) {
        double& i = s.gates[j];
        double& f = s.gates[hidden + j];
        double& g = s.gates[2 * hidden + j];
        double& o = s.gates[3 * hidden + j];
        i = sig(i);
        f = sig(f);
        g = std::tanh(g);
        o = sig(o);
        s.c[j] = f * c[j] + i * g;
        s.h[j] = o * std::tanh(s.c[j]);
    }
    return s;
}

}  // namespace

Tensor gru_cell(const Tensor& x, const Tensor& h, const GruWeights& p) {
    if (x.rows() != 1 || h.rows() != 1) {
        throw ShapeError("gru_cell: x and h must be rows, got " + x.shape_string() + " and " +
                         h.shape_string());
    }
    check_gru(x.cols(), h.cols(), p.wz, p.wr, p.wh, p.bz, p.br, p.bh);
    auto s = gru_forward_step(x.data().data(), x.cols(), h.data().data(), h.cols(), p.wz, p.wr, p.wh,
                              p.bz, p.br, p.bh);
    return Tensor::row(std::move(s.h));
}

LstmState lstm_cell(const Tensor& x, const LstmState& state, const LstmWeights& p) {
    if (x.rows() != 1 || state.h.rows() != 1 || !state.h.same_shape(state.c)) {
        throw ShapeError("lstm_cell: x, h and c must be rows, got " + x.shape_string() + ", " +
                         state.h.shape_string() + " and " + state.c.shape_string());
    }
    check_lstm(x.cols(), state.h.cols(), p.w, p.b);
    auto s = lstm_forward_step(x.data().data(), x.cols(), state.h.data().data(),
                               state.c.data().data(), state.h.cols(), p.w, p.b);
    return {Tensor::row(std::move(s.h)), Tensor::row(std::move(s.c))};
}

Var gru_sequence(Var inputs, const GruVars& p, bool reverse) {
    const Tensor& X = inputs.value();
    const std::size_t T = X.rows(), in = X.cols();
    const std::size_t hidden = p.bz.value().cols();
    check_gru(in, hidden, p.wz.value(), p.wr.value(), p.wh.value(), p.bz.value(), p.br.value(),
              p.bh.value());
    if (T == 0) {
        throw ShapeError("gru_sequence: empty input sequence");
    }

    Tensor H(T, hidden), Z(T, hidden), R(T, hidden), C(T, hidden), Hprev(T, hidden);
    std::vector<double> h(hidden, 0.0);
    for (std::size_t step = 0; step < T; ++step) {
        const std::size_t t = reverse ? T - 1 - step : step;
        auto s = gru_forward_step(&X(t, 0), in, h.data(), hidden, p.wz.value(), p.wr.value(),
                                  p.wh.value(), p.bz.value(), p.br.value(), p.bh.value());
        for (std::size_t j = 0; j < hidden; ++j) {
            Hprev(t, j) = h[j];
            Z(t, j) = s.z[j];
            R(t, j) = s.r[j];
            C(t, j) = s.cand[j];
            H(t, j) = s.h[j];
        }
        h = std::move(s.h);
    }

    std::vector<std::size_t> ids = {inputs.id, p.wz.id, p.wr.id, p.wh.id, p.bz.id, p.br.id, p.bh.id};
    return inputs.graph->record(
        std::move(H), ids,
        [ids, reverse, Z = std::move(Z), R = std::move(R), C = std::move(C),
         Hprev = std::move(Hprev)](Graph& g, std::size_t self) {
            const Tensor& G = g.grad(self);
            const Tensor& X = g.value(ids[0]);
            const Tensor& Wz = g.value(ids[1]);
            const Tensor& Wr = g.value(ids[2]);
            const Tensor& Wh = g.value(ids[3]);
            Tensor* dX = g.grad_sink(ids[0]);
            Tensor* dWz = g.grad_sink(ids[1]);
            Tensor* dWr = g.grad_sink(ids[2]);
            Tensor* dWh = g.grad_sink(ids[3]);
            Tensor* dbz = g.grad_sink(ids[4]);
            Tensor* dbr = g.grad_sink(ids[5]);
            Tensor* dbh = g.grad_sink(ids[6]);
            const std::size_t T = X.rows(), in = X.cols(), hidden = G.cols();

            std::vector<double> carry(hidden, 0.0), dh(hidden), dhp(hidden), daz(hidden),
                dar(hidden), dah(hidden), drh(hidden), rh(hidden), dx(in);
            for (std::size_t step = T; step-- > 0;) {
                const std::size_t t = reverse ? T - 1 - step : step;
                const double* hp = &Hprev(t, 0);
                for (std::size_t j = 0; j < hidden; ++j) {
                    dh[j] = G(t, j) + carry[j];
                    const double z = Z(t, j), c = C(t, j);
                    dhp[j] = dh[j] * z;
                    daz[j] = dh[j] * (hp[j] - c) * z * (1.0 - z);
                    dah[j] = dh[j] * (1.0 - z) * (1.0 - c * c);
                    rh[j] = R(t, j) * hp[j];
                }
                // Candidate path: a_h = [x; r*h] Wh + bh.
                std::fill(drh.begin(), drh.end(), 0.0);
                matvec_t_acc(dah.data(), hidden, Wh, in, 0, hidden, drh.data());
                for (std::size_t j = 0; j < hidden; ++j) {
                    const double r = R(t, j);
                    dar[j] = drh[j] * hp[j] * r * (1.0 - r);
                    dhp[j] += drh[j] * r;
                }
                // Gate inputs [x; h_prev].
                matvec_t_acc(daz.data(), hidden, Wz, in, 0, hidden, dhp.data());
                matvec_t_acc(dar.data(), hidden, Wr, in, 0, hidden, dhp.data());
                if (dX != nullptr) {
                    std::fill(dx.begin(), dx.end(), 0.0);
                    matvec_t_acc(daz.data(), hidden, Wz, 0, 0, in, dx.data());
                    matvec_t_acc(dar.data(), hidden, Wr, 0, 0, in, dx.data());
                    matvec_t_acc(dah.data(), hidden, Wh, 0, 0, in, dx.data());
                    for (std::size_t i = 0; i < in; ++i) {
                        (*dX)(t, i) += dx[i];
                    }
                }
                const double* x = &X(t, 0);
                if (dWz != nullptr) {
                    outer_acc(x, in, daz.data(), hidden, *dWz, 0, 0);
                    outer_acc(hp, hidden, daz.data(), hidden, *dWz, in, 0);
                }
                if (dWr != nullptr) {
                    outer_acc(x, in, dar.data(), hidden, *dWr, 0, 0);
                    outer_acc(hp, hidden, dar.data(), hidden, *dWr, in, 0);
                }
                if (dWh != nullptr) {
                    outer_acc(x, in, dah.data(), hidden, *dWh, 0, 0);
                    outer_acc(rh.data(), hidden, dah.data(), hidden, *dWh, in, 0);
                }
                for (std::size_t j = 0; j < hidden; ++j) {
                    if (dbz != nullptr) {
                        (*dbz)[j] += daz[j];
                    }
                    if (dbr != nullptr) {
                        (*dbr)[j] += dar[j];
                    }
                    if (dbh != nullptr) {
                        (*dbh)[j] += dah[j];
                    }
                }
                carry = dhp;
            }
        });
}

Var lstm_sequence(Var inputs, const LstmVars& p, bool reverse) {
    const Tensor& X = inputs.value();
    const std::size_t T = X.rows(), in = X.cols();
    const std::size_t hidden = p.b.value().cols() / 4;
    check_lstm(in, hidden, p.w.value(), p.b.value());
    if (T == 0) {
        throw ShapeError("lstm_sequence: empty input sequence");
    }

    Tensor H(T, hidden), Cs(T, hidden), Hprev(T, hidden), Cprev(T, hidden), Gates(T, 4 * hidden);
    std::vector<double> h(hidden, 0.0), c(hidden, 0.0);
    for (std::size_t step = 0; step < T; ++step) {
        const std::size_t t = reverse ? T - 1 - step : step;
        auto s = lstm_forward_step(&X(t, 0), in, h.data(), c.data(), hidden, p.w.value(), p.b.value());
        for (std::size_t j = 0; j < hidden; ++j) {
            Hprev(t, j) = h[j];
            Cprev(t, j) = c[j];
            H(t, j) = s.h[j];
            Cs(t, j) = s.c[j];
        }
        std::copy(s.gates.begin(), s.gates.end(), &Gates(t, 0));
        h = std::move(s.h);
        c = std::move(s.c);
    }

    std::vector<std::size_t> ids = {inputs.id, p.w.id, p.b.id};
    return inputs.graph->record(
        std::move(H), ids,
        [ids, reverse, Cs = std::move(Cs), Hprev = std::move(Hprev), Cprev = std::move(Cprev),
         Gates = std::move(Gates)](Graph& g, std::size_t self) {
            const Tensor& G = g.grad(self);
            const Tensor& X = g.value(ids[0]);
            const Tensor& W = g.value(ids[1]);
            Tensor* dX = g.grad_sink(ids[0]);
            Tensor* dW = g.grad_sink(ids[1]);
            Tensor* db = g.grad_sink(ids[2]);
            const std::size_t T = X.rows(), in = X.cols(), hidden = G.cols();

            std::vector<double> dh_carry(hidden, 0.0), dc_carry(hidden, 0.0), da(4 * hidden),
                dhp(hidden), dx(in);
            for (std::size_t step = T; step-- > 0;) {
                const std::size_t t = reverse ? T - 1 - step : step;
                for (std::size_t j = 0; j < hidden; ++j) {
                    const double i = Gates(t, j), f = Gates(t, hidden + j);
                    const double gg = Gates(t, 2 * hidden + j), o = Gates(t, 3 * hidden + j);
                    const double tc = std::tanh(Cs(t, j));
                    const double dh = G(t, j) + dh_carry[j];
                    const double dc = dc_carry[j] + dh * o * (1.0 - tc * tc);
                    da[j] = dc * gg * i * (1.0 - i);
                    da[hidden + j] = dc * Cprev(t, j) * f * (1.0 - f);
                    da[2 * hidden + j] = dc * i * (1.0 - gg * gg);
                    da[3 * hidden + j] = dh * tc * o * (1.0 - o);
                    dc_carry[j] = dc * f;
                }
                std::fill(dhp.begin(), dhp.end(), 0.0);
                matvec_t_acc(da.data(), 4 * hidden, W, in, 0, hidden, dhp.data());
                if (dX != nullptr) {
                    std::fill(dx.begin(), dx.end(), 0.0);
                    matvec_t_acc(da.data(), 4 * hidden, W, 0, 0, in, dx.data());
                    for (std::size_t i = 0; i < in; ++i) {
                        (*dX)(t, i) += dx[i];
                    }
                }
                if (dW != nullptr) {
                    outer_acc(&X(t, 0), in, da.data(), 4 * hidden, *dW, 0, 0);
                    outer_acc(&Hprev(t, 0), hidden, da.data(), 4 * hidden, *dW, in, 0);
                }
                if (db != nullptr) {
                    for (std::size_t j = 0; j < 4 * hidden; ++j) {
                        (*db)[j] += da[j];
                    }
                }
                dh_carry = dhp;
            }
        });
}

}  // namespace mhqa::nc
