#include "mhqa/nc/param_store.hpp"

#include <cmath>

#include "mhqa/errors.hpp"
#include "mhqa/rng.hpp"

namespace mhqa::nc {

Parameter& ParamStore::add(const std::string& name, Tensor init, bool trainable) {
    if (params_.count(name) != 0) {
        throw ValidationError("parameter '" + name + "' registered twice");
    }
    Parameter p;
    p.grad = Tensor::zeros_like(init);
    p.m = Tensor::zeros_like(init);
    p.v = Tensor::zeros_like(init);
    p.value = std::move(init);
    p.trainable = trainable;
    return params_.emplace(name, std::move(p)).first->second;
}

Parameter& ParamStore::add_xavier(const std::string& name, std::size_t rows, std::size_t cols,
                                  Rng& rng) {
    Tensor t(rows, cols);
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (auto& x : t.data()) {
        x = rng.uniform(-limit, limit);
    }
    return add(name, std::move(t));
}

Parameter& ParamStore::add_zeros(const std::string& name, std::size_t rows, std::size_t cols) {
    return add(name, Tensor(rows, cols));
}

Parameter& ParamStore::get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) {
        throw ValidationError("unknown parameter '" + name + "'");
    }
    return it->second;
}

const Parameter& ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) {
        throw ValidationError("unknown parameter '" + name + "'");
    }
    return it->second;
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [name, _] : params_) {
        out.push_back(name);
    }
    return out;
}

std::size_t ParamStore::num_values() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) {
        n += p.value.size();
    }
    return n;
}

void ParamStore::zero_grad() {
    for (auto& [_, p] : params_) {
        p.grad.fill(0.0);
    }
}

void ParamStore::scale_grad(double factor) {
    for (auto& [_, p] : params_) {
        for (auto& g : p.grad.data()) {
            g *= factor;
        }
    }
}

void ParamStore::assign_values(const ParamStore& other) {
    for (auto& [name, p] : params_) {
        auto it = other.params_.find(name);
        if (it == other.params_.end()) {
            continue;
        }
        if (!p.value.same_shape(it->second.value)) {
            throw ShapeError("parameter '" + name + "' has shape " + p.value.shape_string() +
                             " but source has " + it->second.value.shape_string());
        }
        p.value = it->second.value;
    }
}

void adam_step(ParamStore& store, const AdamConfig& config) {
    for (const auto& [name, p] : store.items()) {
        for (double g : p.grad.data()) {
            if (!std::isfinite(g)) {
                throw NumericError("non-finite gradient in parameter '" + name + "'");
            }
        }
    }
    store.set_step(store.step() + 1);
    const double t = static_cast<double>(store.step());
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    for (auto& [_, p] : store.items()) {
        if (!p.trainable) {
            continue;
        }
        auto value = p.value.data();
        auto grad = p.grad.data();
        auto m = p.m.data();
        auto v = p.v.data();
        for (std::size_t i = 0; i < value.size(); ++i) {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            value[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
        }
    }
}

double clip_grad_norm(ParamStore& store, double max_norm) {
    double sq = 0.0;
    for (const auto& [_, p] : store.items()) {
        for (double g : p.grad.data()) {
            sq += g * g;
        }
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        store.scale_grad(max_norm / norm);
    }
    return norm;
}

}  // namespace mhqa::nc
