#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mhqa/nc/tensor.hpp"

namespace mhqa {
class Rng;
}

namespace mhqa::nc {

struct Parameter {
    Tensor value;
    Tensor grad;
    Tensor m;  // Adam first moment
    Tensor v;  // Adam second moment
    bool trainable = true;
};

/// Named trainable tensors. Iteration order is the lexicographic name order,
/// which keeps initialization, updates and serialization deterministic.
class ParamStore {
  public:
    Parameter& add(const std::string& name, Tensor init, bool trainable = true);
    /// Xavier-uniform initialized matrix.
    Parameter& add_xavier(const std::string& name, std::size_t rows, std::size_t cols, Rng& rng);
    Parameter& add_zeros(const std::string& name, std::size_t rows, std::size_t cols);

    bool contains(const std::string& name) const { return params_.count(name) != 0; }
    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;

    std::map<std::string, Parameter>& items() { return params_; }
    const std::map<std::string, Parameter>& items() const { return params_; }
    std::vector<std::string> names() const;
    std::size_t size() const { return params_.size(); }
    std::size_t num_values() const;

    void zero_grad();
    /// Multiplies every gradient by `factor` (batch averaging).
    void scale_grad(double factor);

    std::uint64_t step() const { return step_; }
    void set_step(std::uint64_t s) { step_ = s; }

    /// Overwrites values of parameters present in both stores; shapes must match.
    void assign_values(const ParamStore& other);

  private:
    std::map<std::string, Parameter> params_;
    std::uint64_t step_ = 0;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One bias-corrected Adam update from the gradients held in the store.
/// Throws NumericError naming the first parameter with a non-finite gradient;
/// in that case no parameter is modified.
void adam_step(ParamStore& store, const AdamConfig& config = {});

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
double clip_grad_norm(ParamStore& store, double max_norm);

}  // namespace mhqa::nc
