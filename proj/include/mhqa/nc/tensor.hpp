#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace mhqa::nc {

/// Dense row-major matrix of doubles. Vectors are 1 x n rows; scalars 1 x 1.
class Tensor {
  public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Tensor row(std::vector<double> values) {
        const auto n = values.size();
        return Tensor(1, n, std::move(values));
    }
    static Tensor scalar(double v) { return Tensor(1, 1, v); }
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor zeros_like(const Tensor& t) { return Tensor(t.rows_, t.cols_); }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    std::vector<std::size_t> shape() const { return {rows_, cols_}; }
    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    std::string shape_string() const;

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const double& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::span<double> row_span(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row_span(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    const std::vector<double>& values() const { return data_; }

    void fill(double v);
    /// this += other (same shape).
    void accumulate(const Tensor& other);

    bool operator==(const Tensor&) const = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

}  // namespace mhqa::nc
