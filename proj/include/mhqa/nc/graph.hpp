#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mhqa/nc/param_store.hpp"
#include "mhqa/nc/tensor.hpp"

namespace mhqa {
class Rng;
}

namespace mhqa::nc {

class Graph;

/// Handle to a node on a Graph's tape.
struct Var {
    Graph* graph = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so replaying the
/// tape backwards visits every node after all of its consumers.
class Graph {
  public:
    using BackwardFn = std::function<void(Graph&, std::size_t self)>;

    explicit Graph(ParamStore* store = nullptr) : store_(store) {}
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var constant(Tensor value);
    /// Leaf bound to a stored parameter; repeated calls return the same node.
    Var param(const std::string& name);

    Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
    bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
    /// Gradient accumulator of an input node, or nullptr when the node does
    /// not lead to any parameter.
    Tensor* grad_sink(std::size_t id);

    /// Back-propagates from a 1x1 loss and adds parameter gradients into the
    /// bound ParamStore.
    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }
    ParamStore* store() const { return store_; }

  private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        Parameter* param = nullptr;
        bool needs_grad = false;
    };

    ParamStore* store_;
    std::deque<Node> nodes_;  // stable references while the tape grows
    std::unordered_map<std::string, std::size_t> param_nodes_;
};

// Core operations. Shapes are explicit: the only implicit broadcast is
// add_bias, which adds a 1 x n row to every row of an m x n matrix.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add_bias(Var a, Var bias);
Var scale(Var a, double factor);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var transpose(Var a);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var gather_rows(Var a, const std::vector<std::size_t>& rows);
/// Stacks a 1 x n row `times` times into a times x n matrix.
Var repeat_rows(Var row, std::size_t times);
/// Row-wise softmax. `mask`, when given, holds one flag per element; masked
/// entries behave as -inf logits and receive zero probability.
Var softmax_rows(Var a, const std::vector<char>* mask = nullptr);
/// Replaces masked entries (mask == 0) by `fill`; no gradient flows to them.
Var mask_fill(Var a, const std::vector<char>& mask, double fill);
/// Column-wise maximum over rows: T x n -> 1 x n.
Var max_pool_over_time(Var a);
/// Row-wise maximum over columns: m x n -> m x 1.
Var max_cols(Var a);
Var sum_all(Var a);
/// Multiplies by a fixed, pre-scaled keep mask (see make_dropout_mask).
Var dropout(Var a, const Tensor& mask);
Tensor make_dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng);
/// -ln sum_{i in gold} softmax(logits)_i for a 1 x N logit row. Entries equal
/// to -inf act as masked positions.
Var cross_entropy(Var logits, const std::vector<std::size_t>& gold);

/// Plain-value helpers shared with tests and inference code.
Tensor softmax_row_values(const std::vector<double>& logits);
double cross_entropy_value(const std::vector<double>& logits, const std::vector<std::size_t>& gold);

}  // namespace mhqa::nc
