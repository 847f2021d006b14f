#include "mhqa/nc/tensor.hpp"

#include <algorithm>

#include "mhqa/errors.hpp"

namespace mhqa::nc {

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string());
    }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) {
            throw ShapeError("ragged initializer for tensor");
        }
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor(r, c, std::move(data));
}

std::string Tensor::shape_string() const {
    return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::accumulate(const Tensor& other) {
    if (!same_shape(other)) {
        throw ShapeError("accumulate: " + shape_string() + " += " + other.shape_string());
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
        data_[i] += other.data_[i];
    }
}

}  // namespace mhqa::nc
