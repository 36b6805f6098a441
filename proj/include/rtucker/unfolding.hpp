#pragma once

#include <algorithm>
#include <numeric>
#include <variant>
#include <vector>

#include "rtucker/kernels.hpp"

namespace rtucker {

// Non-owning view of T_(n)^T: one row per multi-index of the remaining modes
// (same column order as matricize), one column per index of mode n. Sparse
// input is regrouped by row once so rows can be fetched without densifying.
// The viewed tensor must outlive the unfolding.
class ModeUnfolding {
 public:
  ModeUnfolding(const DenseTensor& t, std::size_t mode) : mode_(mode), shape_(t.shape()) {
    check_mode(mode, t.order());
    storage_ = DenseView{t.data().data(), extent_before(shape_, mode), shape_[mode], extent_after(shape_, mode)};
  }

  ModeUnfolding(const SparseTensor& t, std::size_t mode) : mode_(mode), shape_(t.shape()) {
    check_mode(mode, t.order());
    SparseRows rows;
    const std::size_t nnz = t.nnz();
    std::vector<std::size_t> keys(nnz);
    for (std::size_t k = 0; k < nnz; ++k) keys[k] = detail::unfolding_column(t.coord(k), shape_, mode);
    std::vector<std::size_t> perm(nnz);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    rows.col.reserve(nnz);
    rows.val.reserve(nnz);
    for (std::size_t k : perm) {
      if (rows.keys.empty() || rows.keys.back() != keys[k]) {
        rows.keys.push_back(keys[k]);
        rows.ptr.push_back(rows.col.size());
      }
      rows.col.push_back(t.index(k, mode));
      rows.val.push_back(t.value(k));
    }
    rows.ptr.push_back(rows.col.size());
    storage_ = std::move(rows);
  }

  std::size_t mode() const { return mode_; }
  const Shape& tensor_shape() const { return shape_; }
  std::size_t rows() const { return shape_product(shape_) / shape_[mode_]; }
  std::size_t cols() const { return shape_[mode_]; }
  bool is_sparse() const { return std::holds_alternative<SparseRows>(storage_); }

  // out[i] += weight * T_(n)^T(row, i)
  void add_row(std::size_t row, double weight, double* out) const {
    if (const auto* d = std::get_if<DenseView>(&storage_)) {
      const std::size_t l = row / d->right;
      const std::size_t rr = row % d->right;
      const double* base = d->data + l * d->sn * d->right + rr;
      for (std::size_t i = 0; i < d->sn; ++i) out[i] += weight * base[i * d->right];
      return;
    }
    const auto& s = std::get<SparseRows>(storage_);
    auto it = std::lower_bound(s.keys.begin(), s.keys.end(), row);
    if (it == s.keys.end() || *it != row) return;
    const auto r = static_cast<std::size_t>(it - s.keys.begin());
    for (std::size_t k = s.ptr[r]; k < s.ptr[r + 1]; ++k) out[s.col[k]] += weight * s.val[k];
  }

  // f(row, col, value) for every stored entry of T_(n)^T.
  template <class F>
  void for_each_nonzero(F&& f) const {
    if (const auto* d = std::get_if<DenseView>(&storage_)) {
      for (std::size_t l = 0; l < d->left; ++l) {
        for (std::size_t i = 0; i < d->sn; ++i) {
          const double* fiber = d->data + (l * d->sn + i) * d->right;
          for (std::size_t rr = 0; rr < d->right; ++rr) f(l * d->right + rr, i, fiber[rr]);
        }
      }
      return;
    }
    const auto& s = std::get<SparseRows>(storage_);
    for (std::size_t r = 0; r < s.keys.size(); ++r) {
      for (std::size_t k = s.ptr[r]; k < s.ptr[r + 1]; ++k) f(s.keys[r], s.col[k], s.val[k]);
    }
  }

  // T_(n) T_(n)^T, an s_n x s_n matrix.
  Matrix gram() const {
    const auto sn = static_cast<Eigen::Index>(cols());
    Matrix g = Matrix::Zero(sn, sn);
    if (const auto* d = std::get_if<DenseView>(&storage_)) {
      for (std::size_t l = 0; l < d->left; ++l) {
        ConstMatrixMap block(d->data + l * d->sn * d->right, sn, static_cast<Eigen::Index>(d->right));
        g.noalias() += block * block.transpose();
      }
      return g;
    }
    const auto& s = std::get<SparseRows>(storage_);
    for (std::size_t r = 0; r < s.keys.size(); ++r) {
      for (std::size_t a = s.ptr[r]; a < s.ptr[r + 1]; ++a) {
        for (std::size_t b = s.ptr[r]; b < s.ptr[r + 1]; ++b) {
          g(static_cast<Eigen::Index>(s.col[a]), static_cast<Eigen::Index>(s.col[b])) += s.val[a] * s.val[b];
        }
      }
    }
    return g;
  }

  // T_(n) * X for X with rows() rows.
  Matrix times(const Matrix& x) const {
    if (static_cast<std::size_t>(x.rows()) != rows()) throw dimension_error("ModeUnfolding::times: row mismatch");
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(cols()), x.cols());
    if (const auto* d = std::get_if<DenseView>(&storage_)) {
      const auto right = static_cast<Eigen::Index>(d->right);
      for (std::size_t l = 0; l < d->left; ++l) {
        ConstMatrixMap block(d->data + l * d->sn * d->right, static_cast<Eigen::Index>(d->sn), right);
        out.noalias() += block * x.middleRows(static_cast<Eigen::Index>(l) * right, right);
      }
      return out;
    }
    for_each_nonzero([&](std::size_t row, std::size_t col, double v) {
      out.row(static_cast<Eigen::Index>(col)) += v * x.row(static_cast<Eigen::Index>(row));
    });
    return out;
  }

  // T_(n)^T * Q for Q with cols() rows.
  Matrix transpose_times(const Matrix& q) const {
    if (static_cast<std::size_t>(q.rows()) != cols()) throw dimension_error("ModeUnfolding::transpose_times: row mismatch");
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rows()), q.cols());
    if (const auto* d = std::get_if<DenseView>(&storage_)) {
      const auto right = static_cast<Eigen::Index>(d->right);
      for (std::size_t l = 0; l < d->left; ++l) {
        ConstMatrixMap block(d->data + l * d->sn * d->right, static_cast<Eigen::Index>(d->sn), right);
        out.middleRows(static_cast<Eigen::Index>(l) * right, right).noalias() = block.transpose() * q;
      }
      return out;
    }
    for_each_nonzero([&](std::size_t row, std::size_t col, double v) {
      out.row(static_cast<Eigen::Index>(row)) += v * q.row(static_cast<Eigen::Index>(col));
    });
    return out;
  }

  // Flops of an explicit Gram, for choosing between exact and randomized SVD.
  double gram_cost() const {
    if (const auto* d = std::get_if<DenseView>(&storage_)) {
      return static_cast<double>(d->sn) * static_cast<double>(d->sn) * static_cast<double>(d->left * d->right);
    }
    const auto& s = std::get<SparseRows>(storage_);
    double acc = 0.0;
    for (std::size_t r = 0; r < s.keys.size(); ++r) {
      const auto k = static_cast<double>(s.ptr[r + 1] - s.ptr[r]);
      acc += k * k;
    }
    return acc;
  }

 private:
  struct DenseView {
    const double* data;
    std::size_t left, sn, right;
  };
  struct SparseRows {
    std::vector<std::size_t> keys;  // sorted distinct row indices
    std::vector<std::size_t> ptr;   // keys.size() + 1 offsets
    std::vector<Index> col;
    std::vector<double> val;
  };

  std::size_t mode_;
  Shape shape_;
  std::variant<DenseView, SparseRows> storage_;
};

}  // namespace rtucker
