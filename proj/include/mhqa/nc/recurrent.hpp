#pragma once

#include "mhqa/nc/graph.hpp"
#include "mhqa/nc/tensor.hpp"

namespace mhqa::nc {

enum class CellKind { gru, lstm };

/// GRU convention, with [x; h] a 1 x (in + hidden) row:
///   z  = sigmoid([x; h] Wz + bz)
///   r  = sigmoid([x; h] Wr + br)
///   h~ = tanh([x; r*h] Wh + bh)
///   h' = z*h + (1 - z)*h~
/// W* are (in + hidden) x hidden, b* are 1 x hidden.
struct GruWeights {
    const Tensor& wz;
    const Tensor& wr;
    const Tensor& wh;
    const Tensor& bz;
    const Tensor& br;
    const Tensor& bh;
};

/// Standard LSTM with gates packed as [i, f, g, o]: W is (in + hidden) x 4
/// hidden, b is 1 x 4 hidden. c' = f*c + i*g, h' = o*tanh(c').
struct LstmWeights {
    const Tensor& w;
    const Tensor& b;
};

struct LstmState {
    Tensor h;
    Tensor c;
};

Tensor gru_cell(const Tensor& x, const Tensor& h, const GruWeights& weights);
LstmState lstm_cell(const Tensor& x, const LstmState& state, const LstmWeights& weights);

struct GruVars {
    Var wz, wr, wh, bz, br, bh;
};

struct LstmVars {
    Var w, b;
};

/// Runs a cell over the rows of `inputs` (T x in) from a zero state and
/// returns the T x hidden matrix of states, row t holding the state after
/// consuming input t. With `reverse`, time runs from T-1 down to 0 and row t
/// still corresponds to input t. Back-propagation through time is fused into
/// a single tape node.
Var gru_sequence(Var inputs, const GruVars& params, bool reverse);
Var lstm_sequence(Var inputs, const LstmVars& params, bool reverse);

}  // namespace mhqa::nc
