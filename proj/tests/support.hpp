#pragma once

#include <gtest/gtest.h>

#include "rtucker/rtucker.hpp"

namespace rtucker::test {

inline DenseTensor random_dense(const Shape& shape, CounterRng& rng) {
  DenseTensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = standard_normal(rng);
  return t;
}

inline DenseTensor random_dense(const Shape& shape, std::uint64_t seed) {
  CounterRng rng(seed);
  return random_dense(shape, rng);
}

// Random tensor with roughly `density` of its entries nonzero.
inline SparseTensor random_sparse(const Shape& shape, double density, std::uint64_t seed) {
  CounterRng rng(seed);
  DenseTensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (uniform01(rng) < density) t[i] = standard_normal(rng);
  }
  return SparseTensor::from_dense(t);
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  CounterRng rng(seed);
  return gaussian_matrix(rows, cols, rng);
}

inline double max_abs_diff(const DenseTensor& a, const DenseTensor& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

inline double orthonormality_error(const Matrix& a) {
  return (a.transpose() * a - Matrix::Identity(a.cols(), a.cols())).norm();
}

// Entry of the mode-n unfolding by the index formula: remaining modes in
// ascending order, earliest slowest.
inline double unfolding_entry(const DenseTensor& t, std::size_t mode, std::size_t row, std::size_t col) {
  const Shape& sh = t.shape();
  std::vector<std::size_t> idx(sh.size());
  idx[mode] = row;
  for (std::size_t m = sh.size(); m-- > 0;) {
    if (m == mode) continue;
    idx[m] = col % sh[m];
    col /= sh[m];
  }
  return t.at(idx);
}

}  // namespace rtucker::test
