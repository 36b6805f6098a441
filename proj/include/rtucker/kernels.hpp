#pragma once

// Contraction kernels: matricization, TTM, TTMc, MTTKRP, Khatri-Rao and
// Kronecker products.
//
// Linearization convention: the mode-n matricization T_(n) has s_n rows and
// its columns enumerate the remaining modes in ascending order with the
// earliest remaining mode varying slowest. Kronecker and Khatri-Rao products
// use the same convention (first factor slowest), so that
//   T_(n)^T = (A1 (x) ... A_{n-1} (x) A_{n+1} (x) ... AN) C_(n)^T A_n^T
// holds for T = C x_1 A1 ... x_N AN.

#include <optional>
#include <span>
#include <vector>

#include "rtucker/tensor.hpp"

namespace rtucker {

// Sparse matrix in coordinate form, used for sparse matricizations.
struct CooMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row;
  std::vector<std::size_t> col;
  std::vector<double> val;

  std::size_t nnz() const { return val.size(); }

  Matrix to_dense() const {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t k = 0; k < val.size(); ++k) {
      out(static_cast<Eigen::Index>(row[k]), static_cast<Eigen::Index>(col[k])) += val[k];
    }
    return out;
  }
};

namespace detail {

inline Eigen::Index ei(std::size_t v) { return static_cast<Eigen::Index>(v); }

// Column of T_(n) for a full coordinate.
template <class IndexT>
std::size_t unfolding_column(std::span<const IndexT> coord, const Shape& shape, std::size_t mode) {
  std::size_t col = 0;
  for (std::size_t m = 0; m < shape.size(); ++m) {
    if (m == mode) continue;
    col = col * shape[m] + coord[m];
  }
  return col;
}

}  // namespace detail

inline Matrix matricize(const DenseTensor& t, std::size_t mode) {
  check_mode(mode, t.order());
  const std::size_t left = extent_before(t.shape(), mode);
  const std::size_t sn = t.extent(mode);
  const std::size_t right = extent_after(t.shape(), mode);
  Matrix out(detail::ei(sn), detail::ei(left * right));
  const double* src = t.data().data();
  for (std::size_t l = 0; l < left; ++l) {
    for (std::size_t i = 0; i < sn; ++i) {
      const double* fiber = src + (l * sn + i) * right;
      double* dst = out.data() + i * left * right + l * right;
      std::copy_n(fiber, right, dst);
    }
  }
  return out;
}

inline CooMatrix matricize(const SparseTensor& t, std::size_t mode) {
  check_mode(mode, t.order());
  CooMatrix out;
  out.rows = t.extent(mode);
  out.cols = shape_product(t.shape()) / out.rows;
  out.row.reserve(t.nnz());
  out.col.reserve(t.nnz());
  out.val.reserve(t.nnz());
  for (std::size_t k = 0; k < t.nnz(); ++k) {
    auto c = t.coord(k);
    out.row.push_back(c[mode]);
    out.col.push_back(detail::unfolding_column(c, t.shape(), mode));
    out.val.push_back(t.value(k));
  }
  return out;
}

// Inverse of matricize for a target shape.
inline DenseTensor fold(const Matrix& unfolded, std::size_t mode, const Shape& shape) {
  check_shape(shape);
  check_mode(mode, shape.size());
  const std::size_t left = extent_before(shape, mode);
  const std::size_t sn = shape[mode];
  const std::size_t right = extent_after(shape, mode);
  if (static_cast<std::size_t>(unfolded.rows()) != sn ||
      static_cast<std::size_t>(unfolded.cols()) != left * right) {
    throw dimension_error("fold: matrix is not a mode-" + std::to_string(mode) + " unfolding of " +
                          shape_string(shape));
  }
  DenseTensor out(shape);
  double* dst = out.data().data();
  for (std::size_t l = 0; l < left; ++l) {
    for (std::size_t i = 0; i < sn; ++i) {
      std::copy_n(unfolded.data() + i * left * right + l * right, right, dst + (l * sn + i) * right);
    }
  }
  return out;
}

// Mode-n product T x_n M with M of shape (J x s_n).
inline DenseTensor ttm(const DenseTensor& t, const Matrix& m, std::size_t mode) {
  check_mode(mode, t.order());
  const std::size_t sn = t.extent(mode);
  if (static_cast<std::size_t>(m.cols()) != sn) {
    throw dimension_error("ttm: matrix has " + std::to_string(m.cols()) + " columns, mode " +
                          std::to_string(mode) + " has extent " + std::to_string(sn));
  }
  Shape out_shape = t.shape();
  out_shape[mode] = static_cast<std::size_t>(m.rows());
  DenseTensor out(out_shape);
  const std::size_t left = extent_before(t.shape(), mode);
  const std::size_t right = extent_after(t.shape(), mode);
  const std::size_t j = out_shape[mode];
  for (std::size_t l = 0; l < left; ++l) {
    ConstMatrixMap block(t.data().data() + l * sn * right, detail::ei(sn), detail::ei(right));
    MatrixMap dst(out.data().data() + l * j * right, detail::ei(j), detail::ei(right));
    dst.noalias() = m * block;
  }
  return out;
}

// Khatri-Rao product of matrices sharing a column count; first factor slowest.
inline Matrix khatri_rao(std::span<const Matrix> mats) {
  if (mats.empty()) throw dimension_error("khatri_rao: empty input");
  const auto k = mats[0].cols();
  for (const auto& a : mats) {
    if (a.cols() != k) throw dimension_error("khatri_rao: column counts differ");
  }
  Matrix out = mats[0];
  for (std::size_t i = 1; i < mats.size(); ++i) {
    const Matrix& b = mats[i];
    Matrix next(out.rows() * b.rows(), k);
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      for (Eigen::Index q = 0; q < b.rows(); ++q) {
        next.row(r * b.rows() + q) = out.row(r).cwiseProduct(b.row(q));
      }
    }
    out = std::move(next);
  }
  return out;
}

inline Matrix kronecker(std::span<const Matrix> mats) {
  if (mats.empty()) throw dimension_error("kronecker: empty input");
  Matrix out = mats[0];
  for (std::size_t i = 1; i < mats.size(); ++i) {
    const Matrix& b = mats[i];
    Matrix next(out.rows() * b.rows(), out.cols() * b.cols());
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      for (Eigen::Index c = 0; c < out.cols(); ++c) {
        next.block(r * b.rows(), c * b.cols(), b.rows(), b.cols()) = out(r, c) * b;
      }
    }
    out = std::move(next);
  }
  return out;
}

// Kronecker product of row vectors scaled by `alpha`, written into `out`
// (which must hold the product of the row lengths). Expands in place from the
// back so no scratch storage is needed.
inline void kron_rows_into(std::span<const double* const> rows, std::span<const std::size_t> lengths, double alpha,
                           double* out) {
  std::size_t len = 1;
  out[0] = alpha;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const double* r = rows[j];
    const std::size_t width = lengths[j];
    for (std::size_t a = len; a-- > 0;) {
      const double v = out[a];
      for (std::size_t b = width; b-- > 0;) out[a * width + b] = v * r[b];
    }
    len *= width;
  }
}

namespace detail {

inline void check_factor_rows(const Shape& shape, std::span<const Matrix> factors, std::optional<std::size_t> skip,
                              const char* what) {
  if (factors.size() != shape.size()) {
    throw dimension_error(std::string(what) + ": expected " + std::to_string(shape.size()) + " factors, got " +
                          std::to_string(factors.size()));
  }
  for (std::size_t m = 0; m < shape.size(); ++m) {
    if (skip && *skip == m) continue;
    if (static_cast<std::size_t>(factors[m].rows()) != shape[m]) {
      throw dimension_error(std::string(what) + ": factor " + std::to_string(m) + " has " +
                            std::to_string(factors[m].rows()) + " rows, tensor extent is " +
                            std::to_string(shape[m]));
    }
  }
}

}  // namespace detail

// Contract every mode except `skip` with the transpose of its factor
// (factor m has shape s_m x R_m). With no skip the result is the core-shaped
// projection T x_1 A1^T ... x_N AN^T.
inline DenseTensor ttmc(const DenseTensor& t, std::span<const Matrix> factors, std::optional<std::size_t> skip) {
  if (skip) check_mode(*skip, t.order());
  detail::check_factor_rows(t.shape(), factors, skip, "ttmc");
  // Contract the mode with the largest shrink ratio first to keep
  // intermediates small.
  std::vector<std::size_t> order;
  for (std::size_t m = 0; m < t.order(); ++m) {
    if (!(skip && *skip == m)) order.push_back(m);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return static_cast<double>(factors[a].cols()) / static_cast<double>(factors[a].rows()) <
           static_cast<double>(factors[b].cols()) / static_cast<double>(factors[b].rows());
  });
  if (order.empty()) return t;
  DenseTensor cur = ttm(t, factors[order[0]].transpose(), order[0]);
  for (std::size_t i = 1; i < order.size(); ++i) cur = ttm(cur, factors[order[i]].transpose(), order[i]);
  return cur;
}

inline DenseTensor ttmc(const SparseTensor& t, std::span<const Matrix> factors, std::optional<std::size_t> skip) {
  const std::size_t order = t.order();
  if (!skip) {
    // Full contraction: keep the last mode open, then contract it densely.
    DenseTensor partial = ttmc(t, factors, order - 1);
    return ttm(partial, factors[order - 1].transpose(), order - 1);
  }
  const std::size_t n = *skip;
  check_mode(n, order);
  detail::check_factor_rows(t.shape(), factors, skip, "ttmc");
  Shape out_shape(order);
  std::size_t width = 1;
  for (std::size_t m = 0; m < order; ++m) {
    out_shape[m] = (m == n) ? t.extent(m) : static_cast<std::size_t>(factors[m].cols());
    if (m != n) width *= out_shape[m];
  }
  // Accumulate the mode-n unfolding of the result row by row.
  Matrix yn = Matrix::Zero(detail::ei(t.extent(n)), detail::ei(width));
  std::vector<const double*> rows(order - 1);
  std::vector<std::size_t> lengths;
  for (std::size_t m = 0; m < order; ++m) {
    if (m != n) lengths.push_back(static_cast<std::size_t>(factors[m].cols()));
  }
  std::vector<double> kron(width);
  for (std::size_t k = 0; k < t.nnz(); ++k) {
    for (std::size_t m = 0, j = 0; m < order; ++m) {
      if (m != n) rows[j++] = factors[m].data() + static_cast<std::size_t>(factors[m].cols()) * t.index(k, m);
    }
    kron_rows_into(rows, lengths, t.value(k), kron.data());
    double* dst = yn.data() + width * t.index(k, n);
    for (std::size_t c = 0; c < width; ++c) dst[c] += kron[c];
  }
  return fold(yn, n, out_shape);
}

inline DenseTensor ttmc(const DenseTensor& t, std::span<const Matrix> factors, std::size_t skip) {
  return ttmc(t, factors, std::optional<std::size_t>(skip));
}
inline DenseTensor ttmc(const SparseTensor& t, std::span<const Matrix> factors, std::size_t skip) {
  return ttmc(t, factors, std::optional<std::size_t>(skip));
}
template <TensorLike T>
DenseTensor ttmc_all(const T& t, std::span<const Matrix> factors) {
  return ttmc(t, factors, std::optional<std::size_t>{});
}

// T_(n) * KhatriRao(factors except n, ascending). Result is s_n x R.
inline Matrix mttkrp(const DenseTensor& t, std::span<const Matrix> factors, std::size_t n) {
  check_mode(n, t.order());
  detail::check_factor_rows(t.shape(), factors, n, "mttkrp");
  std::optional<Eigen::Index> rank;
  for (std::size_t m = 0; m < t.order(); ++m) {
    if (m == n) continue;
    if (rank && factors[m].cols() != *rank) throw dimension_error("mttkrp: factor column counts differ");
    rank = factors[m].cols();
  }
  const std::size_t sn = t.extent(n);
  if (!rank) {
    // Order-1 tensor: the Khatri-Rao product of nothing is a single column of ones.
    return ConstMatrixMap(t.data().data(), detail::ei(sn), 1);
  }
  const Eigen::Index r = *rank;
  const std::size_t left = extent_before(t.shape(), n);
  const std::size_t right = extent_after(t.shape(), n);
  auto kr_of = [&](std::size_t first, std::size_t last) -> Matrix {
    if (first == last) return Matrix::Ones(1, r);
    return khatri_rao(factors.subspan(first, last - first));
  };
  const Matrix kr_left = kr_of(0, n);
  const Matrix kr_right = kr_of(n + 1, t.order());
  if (right == 1) {
    ConstMatrixMap tm(t.data().data(), detail::ei(left), detail::ei(sn));
    return tm.transpose() * kr_left;
  }
  ConstMatrixMap tm(t.data().data(), detail::ei(left * sn), detail::ei(right));
  const Matrix w = tm * kr_right;
  Matrix out = Matrix::Zero(detail::ei(sn), r);
  for (std::size_t l = 0; l < left; ++l) {
    out += w.middleRows(detail::ei(l * sn), detail::ei(sn)) * kr_left.row(detail::ei(l)).asDiagonal();
  }
  return out;
}

inline Matrix mttkrp(const SparseTensor& t, std::span<const Matrix> factors, std::size_t n) {
  check_mode(n, t.order());
  detail::check_factor_rows(t.shape(), factors, n, "mttkrp");
  std::optional<Eigen::Index> rank;
  for (std::size_t m = 0; m < t.order(); ++m) {
    if (m == n) continue;
    if (rank && factors[m].cols() != *rank) throw dimension_error("mttkrp: factor column counts differ");
    rank = factors[m].cols();
  }
  const Eigen::Index r = rank.value_or(1);
  Matrix out = Matrix::Zero(detail::ei(t.extent(n)), r);
  Eigen::RowVectorXd acc(r);
  for (std::size_t k = 0; k < t.nnz(); ++k) {
    acc.setConstant(t.value(k));
    for (std::size_t m = 0; m < t.order(); ++m) {
      if (m != n) acc.array() *= factors[m].row(t.index(k, m)).array();
    }
    out.row(t.index(k, n)) += acc;
  }
  return out;
}

}  // namespace rtucker
