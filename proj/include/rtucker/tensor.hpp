#pragma once

#include <algorithm>
#include <concepts>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace rtucker {

// Row-major dense matrix. Every factor matrix, matricization and sketch in the
// library uses this type.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Shape = std::vector<std::size_t>;
using Index = std::uint32_t;

using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

class dimension_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::size_t shape_product(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(std::span<const std::size_t> shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

inline void check_shape(const Shape& shape) {
  if (shape.empty()) throw dimension_error("tensor order must be at least 1");
  for (auto s : shape) {
    if (s == 0) throw dimension_error("tensor extents must be positive, got " + shape_string(shape));
  }
}

inline void check_mode(std::size_t mode, std::size_t order) {
  if (mode >= order) {
    throw dimension_error("mode " + std::to_string(mode) + " out of range for order " +
                          std::to_string(order));
  }
}

// Product of extents strictly before / strictly after `mode`.
inline std::size_t extent_before(const Shape& shape, std::size_t mode) {
  return shape_product(std::span(shape).first(mode));
}
inline std::size_t extent_after(const Shape& shape, std::size_t mode) {
  return shape_product(std::span(shape).subspan(mode + 1));
}

// Order-N dense tensor, row-major (last index fastest).
class DenseTensor {
 public:
  DenseTensor() = default;

  explicit DenseTensor(Shape shape) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(shape_product(shape_), 0.0);
  }

  DenseTensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (data_.size() != shape_product(shape_)) {
      throw dimension_error("dense tensor data length " + std::to_string(data_.size()) +
                            " does not match shape " + shape_string(shape_));
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t order() const { return shape_.size(); }
  std::size_t extent(std::size_t mode) const { return shape_.at(mode); }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::size_t linear_index(std::span<const std::size_t> idx) const {
    std::size_t lin = 0;
    for (std::size_t m = 0; m < shape_.size(); ++m) lin = lin * shape_[m] + idx[m];
    return lin;
  }

  double& at(std::span<const std::size_t> idx) { return data_[linear_index(idx)]; }
  double at(std::span<const std::size_t> idx) const { return data_[linear_index(idx)]; }
  double& at(std::initializer_list<std::size_t> idx) { return at(std::span(idx.begin(), idx.size())); }
  double at(std::initializer_list<std::size_t> idx) const { return at(std::span(idx.begin(), idx.size())); }

  double squared_norm() const {
    double acc = 0.0;
    for (double v : data_) acc += v * v;
    return acc;
  }
  double norm() const { return std::sqrt(squared_norm()); }

  std::size_t count_nonzeros() const {
    return static_cast<std::size_t>(std::count_if(data_.begin(), data_.end(), [](double v) { return v != 0.0; }));
  }

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Order-N coordinate-format tensor. Entries are kept sorted lexicographically
// by coordinate and coordinates are unique.
class SparseTensor {
 public:
  SparseTensor() = default;

  explicit SparseTensor(Shape shape) : shape_(std::move(shape)) { check_shape(shape_); }

  // `coords` holds nnz * order indices, entry k at [k*order, (k+1)*order).
  // Unsorted input is sorted; duplicates and out-of-range indices throw.
  SparseTensor(Shape shape, std::vector<Index> coords, std::vector<double> values)
      : shape_(std::move(shape)) {
    check_shape(shape_);
    const std::size_t order = shape_.size();
    if (coords.size() != values.size() * order) {
      throw dimension_error("sparse tensor: " + std::to_string(coords.size()) + " indices for " +
                            std::to_string(values.size()) + " values of order " + std::to_string(order));
    }
    const std::size_t nnz = values.size();
    for (std::size_t k = 0; k < nnz; ++k) {
      for (std::size_t m = 0; m < order; ++m) {
        if (coords[k * order + m] >= shape_[m]) {
          throw dimension_error("sparse tensor: coordinate out of range at entry " + std::to_string(k));
        }
      }
    }
    std::vector<std::size_t> perm(nnz);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    auto less = [&](std::size_t a, std::size_t b) {
      return std::lexicographical_compare(coords.begin() + a * order, coords.begin() + (a + 1) * order,
                                          coords.begin() + b * order, coords.begin() + (b + 1) * order);
    };
    if (!std::is_sorted(perm.begin(), perm.end(), less)) std::sort(perm.begin(), perm.end(), less);
    coords_.resize(coords.size());
    values_.resize(nnz);
    for (std::size_t k = 0; k < nnz; ++k) {
      std::copy_n(coords.begin() + perm[k] * order, order, coords_.begin() + k * order);
      values_[k] = values[perm[k]];
      if (k > 0 && std::equal(coords_.begin() + (k - 1) * order, coords_.begin() + k * order,
                              coords_.begin() + k * order)) {
        throw dimension_error("sparse tensor: duplicate coordinate at sorted entry " + std::to_string(k));
      }
    }
  }

  static SparseTensor from_dense(const DenseTensor& dense) {
    SparseTensor out(dense.shape());
    const std::size_t order = dense.order();
    std::vector<Index> idx(order, 0);
    for (std::size_t lin = 0; lin < dense.size(); ++lin) {
      if (dense[lin] != 0.0) {
        out.coords_.insert(out.coords_.end(), idx.begin(), idx.end());
        out.values_.push_back(dense[lin]);
      }
      for (std::size_t m = order; m-- > 0;) {
        if (++idx[m] < dense.shape()[m]) break;
        idx[m] = 0;
      }
    }
    return out;
  }

  // Appends an entry that must sort strictly after the current last entry.
  // Used by generators that emit coordinates in lexicographic order.
  void push_back_sorted(std::span<const Index> coord, double value) {
    const std::size_t order = shape_.size();
    if (coord.size() != order) throw dimension_error("push_back_sorted: wrong coordinate length");
    for (std::size_t m = 0; m < order; ++m) {
      if (coord[m] >= shape_[m]) throw dimension_error("push_back_sorted: coordinate out of range");
    }
    if (!values_.empty()) {
      auto last = std::span(coords_).subspan(coords_.size() - order);
      if (!std::lexicographical_compare(last.begin(), last.end(), coord.begin(), coord.end())) {
        throw dimension_error("push_back_sorted: coordinates must be strictly increasing");
      }
    }
    coords_.insert(coords_.end(), coord.begin(), coord.end());
    values_.push_back(value);
  }

  const Shape& shape() const { return shape_; }
  std::size_t order() const { return shape_.size(); }
  std::size_t extent(std::size_t mode) const { return shape_.at(mode); }
  std::size_t nnz() const { return values_.size(); }

  std::span<const Index> coord(std::size_t k) const {
    return std::span(coords_).subspan(k * shape_.size(), shape_.size());
  }
  Index index(std::size_t k, std::size_t mode) const { return coords_[k * shape_.size() + mode]; }
  double value(std::size_t k) const { return values_[k]; }
  std::span<const double> values() const { return values_; }
  std::span<const Index> coords() const { return coords_; }

  double squared_norm() const {
    double acc = 0.0;
    for (double v : values_) acc += v * v;
    return acc;
  }
  double norm() const { return std::sqrt(squared_norm()); }

  double density() const { return static_cast<double>(nnz()) / static_cast<double>(shape_product(shape_)); }

  DenseTensor to_dense() const {
    DenseTensor out(shape_);
    const std::size_t order = shape_.size();
    for (std::size_t k = 0; k < nnz(); ++k) {
      std::size_t lin = 0;
      for (std::size_t m = 0; m < order; ++m) lin = lin * shape_[m] + coords_[k * order + m];
      out[lin] = values_[k];
    }
    return out;
  }

 private:
  Shape shape_;
  std::vector<Index> coords_;
  std::vector<double> values_;
};

// Concept covering both storage formats; drivers are templates over it.
template <class T>
concept TensorLike = std::same_as<T, DenseTensor> || std::same_as<T, SparseTensor>;

using AnyTensor = std::variant<DenseTensor, SparseTensor>;

}  // namespace rtucker
