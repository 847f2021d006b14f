#include "mhqa/nc/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mhqa/errors.hpp"
#include "mhqa/rng.hpp"

namespace mhqa::nc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                     b.shape_string());
}

void check_same_graph(Var a, Var b) {
    if (a.graph != b.graph || a.graph == nullptr) {
        throw ShapeError("operands belong to different graphs");
    }
}

double sigmoid_value(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

const Tensor& Var::value() const { return graph->value(id); }

Var Graph::constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Graph::param(const std::string& name) {
    if (store_ == nullptr) {
        throw ValidationError("graph has no parameter store");
    }
    auto it = param_nodes_.find(name);
    if (it != param_nodes_.end()) {
        return {this, it->second};
    }
    Parameter& p = store_->get(name);
    Node n;
    n.value = p.value;
    n.param = &p;
    n.needs_grad = true;
    nodes_.push_back(std::move(n));
    param_nodes_.emplace(name, nodes_.size() - 1);
    return {this, nodes_.size() - 1};
}

Var Graph::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = std::any_of(inputs.begin(), inputs.end(),
                               [this](std::size_t i) { return nodes_[i].needs_grad; });
    n.inputs = std::move(inputs);
    if (n.needs_grad) {
        n.backward = std::move(backward);
    }
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Tensor* Graph::grad_sink(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.needs_grad) {
        return nullptr;
    }
    if (n.grad.empty() && !n.value.empty()) {
        n.grad = Tensor::zeros_like(n.value);
    }
    return &n.grad;
}

void Graph::backward(Var loss) {
    if (loss.graph != this) {
        throw ShapeError("backward: loss belongs to another graph");
    }
    const Tensor& v = nodes_[loss.id].value;
    if (v.rows() != 1 || v.cols() != 1) {
        throw ShapeError("backward: loss must be a 1x1 scalar, got " + v.shape_string());
    }
    if (!nodes_[loss.id].needs_grad) {
        return;
    }
    grad_sink(loss.id)->fill(1.0);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.needs_grad || n.grad.empty()) {
            continue;
        }
        if (n.backward) {
            n.backward(*this, i);
        }
        if (n.param != nullptr) {
            n.param->grad.accumulate(n.grad);
        }
    }
}

Var matmul(Var a, Var b) {
    check_same_graph(a, b);
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (A.cols() != B.rows()) {
        shape_error("matmul", A, B);
    }
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    Tensor out(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = &out(i, 0);
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = A(i, p);
            if (aip == 0.0) {
                continue;
            }
            const double* brow = &B(p, 0);
            for (std::size_t j = 0; j < n; ++j) {
                orow[j] += aip * brow[j];
            }
        }
    }
    return a.graph->record(std::move(out), {a.id, b.id}, [ai = a.id, bi = b.id](Graph& g, std::size_t self) {
        const Tensor& G = g.grad(self);
        const Tensor& A = g.value(ai);
        const Tensor& B = g.value(bi);
        const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
        if (Tensor* dA = g.grad_sink(ai)) {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    double s = 0.0;
                    const double* grow = &G(i, 0);
                    const double* brow = &B(p, 0);
                    for (std::size_t j = 0; j < n; ++j) {
                        s += grow[j] * brow[j];
                    }
                    (*dA)(i, p) += s;
                }
            }
        }
        if (Tensor* dB = g.grad_sink(bi)) {
            for (std::size_t i = 0; i < m; ++i) {
                const double* grow = &G(i, 0);
                for (std::size_t p = 0; p < k; ++p) {
                    const double aip = A(i, p);
                    if (aip == 0.0) {
                        continue;
                    }
                    double* drow = &(*dB)(p, 0);
                    for (std::size_t j = 0; j < n; ++j) {
                        drow[j] += aip * grow[j];
                    }
                }
            }
        }
    });
}

namespace {

template <typename Fwd, typename DA, typename DB>
Var binary_elementwise(const char* name, Var a, Var b, Fwd fwd, DA da, DB db) {
    check_same_graph(a, b);
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (!A.same_shape(B)) {
        shape_error(name, A, B);
    }
    Tensor out = Tensor::zeros_like(A);
    for (std::size_t i = 0; i < A.size(); ++i) {
        out[i] = fwd(A[i], B[i]);
    }
    return a.graph->record(std::move(out), {a.id, b.id}, [ai = a.id, bi = b.id, da, db](Graph& g, std::size_t self) {
        const Tensor& G = g.grad(self);
        const Tensor& A = g.value(ai);
        const Tensor& B = g.value(bi);
        if (Tensor* dA = g.grad_sink(ai)) {
            for (std::size_t i = 0; i < G.size(); ++i) {
                (*dA)[i] += G[i] * da(A[i], B[i]);
            }
        }
        if (Tensor* dB = g.grad_sink(bi)) {
            for (std::size_t i = 0; i < G.size(); ++i) {
                (*dB)[i] += G[i] * db(A[i], B[i]);
            }
        }
    });
}

template <typename Fwd, typename Deriv>
Var unary_elementwise(Var a, Fwd fwd, Deriv deriv) {
    const Tensor& A = a.value();
    Tensor out = Tensor::zeros_like(A);
    for (std::size_t i = 0; i < A.size(); ++i) {
        out[i] = fwd(A[i]);
    }
    // deriv(x, y) receives the input and the output value.
    return a.graph->record(std::move(out), {a.id}, [ai = a.id, deriv](Graph& g, std::size_t self) {
        const Tensor& G = g.grad(self);
        const Tensor& A = g.value(ai);
        const Tensor& Y = g.value(self);
        if (Tensor* dA = g.grad_sink(ai)) {
            for (std::size_t i = 0; i < G.size(); ++i) {
                (*dA)[i] += G[i] * deriv(A[i], Y[i]);
            }
        }
    });
}

}  // namespace

Var add(Var a, Var b) {
    return binary_elementwise(
        "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
    return binary_elementwise(
        "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
    return binary_elementwise(
        "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Var add_bias(Var a, Var bias) {
    check_same_graph(a, bias);
    const Tensor& A = a.value();
    const Tensor& B = bias.value();
    if (B.rows() != 1 || B.cols() != A.cols()) {
        shape_error("add_bias", A, B);
    }
    Tensor out = A;
    for (std::size_t i = 0; i < A.rows(); ++i) {
        for (std::size_t j = 0; j < A.cols(); ++j) {
            out(i, j) += B(0, j);
        }
    }
    return a.graph->record(std::move(out), {a.id, bias.id}, [ai = a.id, bi = bias.id](Graph& g, std::size_t self) {
        const Tensor& G = g.grad(self);
        if (Tensor* dA = g.grad_sink(ai)) {
            dA->accumulate(G);
        }
        if (Tensor* dB = g.grad_sink(bi)) {
            for (std::size_t i = 0; i < G.rows(); ++i) {
                for (std::size_t j = 0; j < G.cols(); ++j) {
                    (*dB)(0, j) += G(i, j);
                }
            }
        }
    });
}

Var scale(Var a, double factor) {
    return unary_elementwise(
        a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Var sigmoid(Var a) {
    return unary_elementwise(
        a, [](double x) { return sigmoid_value(x); }, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
    return unary_elementwise(
        a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
    return unary_elementwise(
        a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var transpose(Var a) {
    const Tensor& A = a.value();
    Tensor out(A.cols(), A.rows());
    for (std::size_t i = 0; i < A.rows(); ++i) {
        for (std::size_t j = 0; j < A.cols(); ++j) {
            out(j, i) = A(i, j);
        }
    }
    return a.graph->record(std::move(out), {a.id}, [ai = a.id](Graph& g, std::size_t self) {
        const Tensor& G = g.grad(self);
        if (Tensor* dA = g.grad_sink(ai)) {
            for (std::size_t i = 0; i < dA->rows(); ++i) {
                for (std::size_t j = 0; j < dA->cols(); ++j) {
                    (*dA)(i, j) += G(j, i);
                }
            }
        }
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) {
        throw ShapeError("concat_cols: no inputs");
    }
    const std::size_t rows = parts[0].rows();
    std::size_t cols = 0;
    std::vector<std::size_t> ids;
    for (const Var& p : parts) {
        check_same_graph(parts[0], p);
        if (p.rows() != rows) {
            shape_error("concat_cols", parts[0].value(), p.value());
        }
        cols += p.cols();
        ids.push_back(p.id);
    }
    Tensor out(rows, cols);
    std::size_t offset = 0;
    for (const Var& p : parts) {
        const Tensor& P = p.value();
        for (std::size_t i = 0; i < rows; ++i) {
            std::copy_n(&P(i, 0), P.cols(), &out(i, offset));
        }
        offset += P.cols();
    }
    auto inputs = ids;
    return parts[0].graph->record(std::move(out), std::move(inputs), [ids](Graph& g, std::size_t self) {
        const Tensor& G = g.grad(self);
        std::size_t offset = 0;
        for (std::size_t id : ids) {
            const std::size_t c = g.value(id).cols();
            if (Tensor* d = g.grad_sink(id)) {
                for (std::size_t i = 0; i < G.rows(); ++i) {
                    for (std::size_t j = 0; j < c; ++j) {
                        (*d)(i, j) += G(i, offset + j);
                    }
                }
            }
            offset += c;
        }
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) {
        throw ShapeError("concat_rows: no inputs");
    }
    const std::size_t cols = parts[0].cols();
    std::size_t rows = 0;
    std::vector<std::size_t> ids;
    for (const Var& p : parts) {
        check_same_graph(parts[0], p);
        if (p.cols() != cols) {
            shape_error("concat_rows", parts[0].value(), p.value());
        }
        rows += p.rows();
        ids.push_back(p.id);
    }
    std::vector<double> data;
    data.reserve(rows * cols);
    for (const Var& p : parts) {
        const auto d = p.value().data();
        data.insert(data.end(), d.begin(), d.end());
    }
    auto inputs = ids;
    return parts[0].graph->record(Tensor(rows, cols, std::move(data)), std::move(inputs),
                                  [ids](Graph& g, std::size_t self) {
                                      const Tensor& G = g.grad(self);
                                      std::size_t offset = 0;
                                      for (std::size_t id : ids) {
                                          const std::size_t n = g.value(id).size();
                                          if (Tensor* d = g.grad_sink(id)) {
                                              for (std::size_t i = 0; i < n; ++i) {
                                                  (*d)[i] += G[offset + i];
                                              }
                                          }
                                          offset += n;
                                      }
                                  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
    const Tensor& A = a.value();
    if (begin >= end || end > A.rows()) {
        throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range for " + A.shape_string());
    }
    const std::size_t c = A.cols();
    std::vector<double> data(A.data().begin() + static_cast<std::ptrdiff_t>(begin * c),
                             A.data().begin() + static_cast<std::ptrdiff_t>(end * c));
    return a.graph->record(Tensor(end - begin, c, std::move(data)), {a.id},
                           [ai = a.id, begin](Graph& g, std::size_t self) {
                               const Tensor& G = g.grad(self);
                               if (Tensor* d = g.grad_sink(ai)) {
                                   const std::size_t off = begin * G.cols();
                                   for (std::size_t i = 0; i < G.size(); ++i) {
                                       (*d)[off + i] += G[i];
                                   }
                               }
                           });
}

Var gather_rows(Var a, const std::vector<std::size_t>& rows) {
    const Tensor& A = a.value();
    if (rows.empty()) {
        throw ShapeError("gather_rows: empty index list");
    }
    Tensor out(rows.size(), A.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= A.rows()) {
            throw ShapeError("gather_rows: row " + std::to_string(rows[i]) + " out of range for " +
                             A.shape_string());
        }
        std::copy_n(&A(rows[i], 0), A.cols(), &out(i, 0));
    }
    return a.graph->record(std::move(out), {a.id}, [ai = a.id, rows](Graph& g, std::size_t self) {
        const Tensor& G = g.grad(self);
        if (Tensor* d = g.grad_sink(ai)) {
            for (std::size_t i = 0; i < rows.size(); ++i) {
                for (std::size_t j = 0; j < G.cols(); ++j) {
                    (*d)(rows[i], j) += G(i, j);
                }
            }
        }
    });
}

Var repeat_rows(Var row, std::size_t times) {
    const Tensor& R = row.value();
    if (R.rows() != 1 || times == 0) {
        throw ShapeError("repeat_rows: expected a 1 x n row and times > 0, got " + R.shape_string());
    }
    Tensor out(times, R.cols());
    for (std::size_t i = 0; i < times; ++i) {
        std::copy_n(&R(0, 0), R.cols(), &out(i, 0));
    }
    return row.graph->record(std::move(out), {row.id}, [ri = row.id](Graph& g, std::size_t self) {
        const Tensor& G = g.grad(self);
        if (Tensor* d = g.grad_sink(ri)) {
            for (std::size_t i = 0; i < G.rows(); ++i) {
                for (std::size_t j = 0; j < G.cols(); ++j) {
                    (*d)(0, j) += G(i, j);
                }
            }
        }
    });
}

Var softmax_rows(Var a, const std::vector<char>* mask) {
    const Tensor& A = a.value();
    if (mask != nullptr && mask->size() != A.size()) {
        throw ShapeError("softmax_rows: mask size " + std::to_string(mask->size()) +
                         " does not match " + A.shape_string());
    }
    Tensor out = Tensor::zeros_like(A);
    for (std::size_t i = 0; i < A.rows(); ++i) {
        double mx = kNegInf;
        for (std::size_t j = 0; j < A.cols(); ++j) {
            const std::size_t k = i * A.cols() + j;
            if ((mask == nullptr || (*mask)[k]) && A[k] > mx) {
                mx = A[k];
            }
        }
        if (mx == kNegInf) {
            throw NumericError("softmax_rows: row " + std::to_string(i) + " is fully masked");
        }
        double z = 0.0;
        for (std::size_t j = 0; j < A.cols(); ++j) {
            const std::size_t k = i * A.cols() + j;
            if (mask == nullptr || (*mask)[k]) {
                out[k] = std::exp(A[k] - mx);
                z += out[k];
            }
        }
        for (std::size_t j = 0; j < A.cols(); ++j) {
            out(i, j) /= z;
        }
    }
    return a.graph->record(std::move(out), {a.id}, [ai = a.id](Graph& g, std::size_t self) {
        const Tensor& G = g.grad(self);
        const Tensor& Y = g.value(self);
        if (Tensor* d = g.grad_sink(ai)) {
            for (std::size_t i = 0; i < Y.rows(); ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < Y.cols(); ++j) {
                    dot += G(i, j) * Y(i, j);
                }
                for (std::size_t j = 0; j < Y.cols(); ++j) {
                    (*d)(i, j) += Y(i, j) * (G(i, j) - dot);
                }
            }
        }
    });
}

Var mask_fill(Var a, const std::vector<char>& mask, double fill) {
    const Tensor& A = a.value();
    if (mask.size() != A.size()) {
        throw ShapeError("mask_fill: mask size " + std::to_string(mask.size()) + " does not match " +
                         A.shape_string());
    }
    Tensor out = A;
    for (std::size_t i = 0; i < A.size(); ++i) {
        if (!mask[i]) {
            out[i] = fill;
        }
    }
    return a.graph->record(std::move(out), {a.id}, [ai = a.id, mask](Graph& g, std::size_t self) {
        const Tensor& G = g.grad(self);
        if (Tensor* d = g.grad_sink(ai)) {
            for (std::size_t i = 0; i < G.size(); ++i) {
                if (mask[i]) {
                    (*d)[i] += G[i];
                }
            }
        }
    });
}

Var max_pool_over_time(Var a) {
    const Tensor& A = a.value();
    if (A.rows() == 0) {
        throw ShapeError("max_pool_over_time: empty input");
    }
    Tensor out(1, A.cols());
    std::vector<std::size_t> argmax(A.cols(), 0);
    for (std::size_t j = 0; j < A.cols(); ++j) {
        double best = A(0, j);
        for (std::size_t i = 1; i < A.rows(); ++i) {
            if (A(i, j) > best) {
                best = A(i, j);
                argmax[j] = i;
            }
        }
        out(0, j) = best;
    }
    return a.graph->record(std::move(out), {a.id}, [ai = a.id, argmax](Graph& g, std::size_t self) {
        const Tensor& G = g.grad(self);
        if (Tensor* d = g.grad_sink(ai)) {
            for (std::size_t j = 0; j < argmax.size(); ++j) {
                (*d)(argmax[j], j) += G(0, j);
            }
        }
    });
}

Var max_cols(Var a) {
    const Tensor& A = a.value();
    if (A.cols() == 0) {
        throw ShapeError("max_cols: empty input");
    }
    Tensor out(A.rows(), 1);
    std::vector<std::size_t> argmax(A.rows(), 0);
    for (std::size_t i = 0; i < A.rows(); ++i) {
        double best = A(i, 0);
        for (std::size_t j = 1; j < A.cols(); ++j) {
            if (A(i, j) > best) {
                best = A(i, j);
                argmax[i] = j;
            }
        }
        out(i, 0) = best;
    }
    return a.graph->record(std::move(out), {a.id}, [ai = a.id, argmax](Graph& g, std::size_t self) {
        const Tensor& G = g.grad(self);
        if (Tensor* d = g.grad_sink(ai)) {
            for (std::size_t i = 0; i < argmax.size(); ++i) {
                (*d)(i, argmax[i]) += G(i, 0);
            }
        }
    });
}

Var sum_all(Var a) {
    double s = 0.0;
    for (double x : a.value().data()) {
        s += x;
    }
    return a.graph->record(Tensor::scalar(s), {a.id}, [ai = a.id](Graph& g, std::size_t self) {
        const double G = g.grad(self)[0];
        if (Tensor* d = g.grad_sink(ai)) {
            for (auto& x : d->data()) {
                x += G;
            }
        }
    });
}

Var dropout(Var a, const Tensor& mask) {
    if (!mask.same_shape(a.value())) {
        shape_error("dropout", a.value(), mask);
    }
    return mul(a, a.graph->constant(mask));
}

Tensor make_dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
    Tensor mask(rows, cols, 1.0);
    if (rate <= 0.0) {
        return mask;
    }
    const double keep = 1.0 - rate;
    for (auto& m : mask.data()) {
        m = rng.uniform() < keep ? 1.0 / keep : 0.0;
    }
    return mask;
}

Tensor softmax_row_values(const std::vector<double>& logits) {
    double mx = kNegInf;
    for (double x : logits) {
        mx = std::max(mx, x);
    }
    Tensor out(1, logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = logits[i] == kNegInf ? 0.0 : std::exp(logits[i] - mx);
        z += out[i];
    }
    for (auto& x : out.data()) {
        x /= z;
    }
    return out;
}

namespace {

double log_sum_exp(const std::vector<double>& logits, const std::vector<std::size_t>* subset) {
    double mx = kNegInf;
    auto visit = [&](auto&& fn) {
        if (subset == nullptr) {
            for (std::size_t i = 0; i < logits.size(); ++i) {
                fn(i);
            }
        } else {
            for (std::size_t i : *subset) {
                fn(i);
            }
        }
    };
    visit([&](std::size_t i) { mx = std::max(mx, logits[i]); });
    if (mx == kNegInf) {
        return kNegInf;
    }
    double z = 0.0;
    visit([&](std::size_t i) {
        if (logits[i] != kNegInf) {
            z += std::exp(logits[i] - mx);
        }
    });
    return mx + std::log(z);
}

std::vector<std::size_t> validated_gold(const std::vector<double>& logits, const std::vector<std::size_t>& gold) {
    if (gold.empty()) {
        throw ValidationError("cross_entropy: empty gold set");
    }
    std::vector<std::size_t> unique = gold;
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    for (std::size_t i : unique) {
        if (i >= logits.size()) {
            throw ValidationError("cross_entropy: gold index " + std::to_string(i) + " out of range " +
                                  std::to_string(logits.size()));
        }
        if (logits[i] == kNegInf) {
            throw ValidationError("cross_entropy: gold index " + std::to_string(i) + " is masked");
        }
    }
    return unique;
}

}  // namespace

double cross_entropy_value(const std::vector<double>& logits, const std::vector<std::size_t>& gold) {
    const auto unique = validated_gold(logits, gold);
    return log_sum_exp(logits, nullptr) - log_sum_exp(logits, &unique);
}

Var cross_entropy(Var logits, const std::vector<std::size_t>& gold) {
    const Tensor& L = logits.value();
    if (L.rows() != 1) {
        throw ShapeError("cross_entropy: expected a 1 x N logit row, got " + L.shape_string());
    }
    const std::vector<double>& values = L.values();
    const auto unique = validated_gold(values, gold);
    const double all = log_sum_exp(values, nullptr);
    const double sub = log_sum_exp(values, &unique);
    return logits.graph->record(
        Tensor::scalar(all - sub), {logits.id}, [li = logits.id, unique, all, sub](Graph& g, std::size_t self) {
            const double G = g.grad(self)[0];
            const Tensor& L = g.value(li);
            if (Tensor* d = g.grad_sink(li)) {
                // d/dl_i = softmax_i - [i in gold] * softmax restricted to gold.
                for (std::size_t i = 0; i < L.size(); ++i) {
                    if (L[i] != kNegInf) {
                        (*d)[i] += G * std::exp(L[i] - all);
                    }
                }
                for (std::size_t i : unique) {
                    (*d)[i] -= G * std::exp(L[i] - sub);
                }
            }
        });
}

}  // namespace mhqa::nc
