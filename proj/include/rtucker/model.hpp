#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rtucker/kernels.hpp"

namespace rtucker {

// Core tensor contracted along each mode with a factor matrix. Drivers keep
// the factors orthonormal; the fitness routines do not rely on that.
struct TuckerModel {
  DenseTensor core;
  std::vector<Matrix> factors;

  std::size_t order() const { return factors.size(); }

  Shape ranks() const {
    Shape r;
    for (const auto& a : factors) r.push_back(static_cast<std::size_t>(a.cols()));
    return r;
  }

  void validate() const {
    if (core.order() != factors.size()) throw dimension_error("tucker model: core order differs from factor count");
    for (std::size_t n = 0; n < factors.size(); ++n) {
      if (static_cast<std::size_t>(factors[n].cols()) != core.extent(n)) {
        throw dimension_error("tucker model: factor " + std::to_string(n) + " rank does not match core extent");
      }
    }
  }

  DenseTensor reconstruct() const {
    validate();
    DenseTensor out = core;
    for (std::size_t n = 0; n < factors.size(); ++n) out = ttm(out, factors[n], n);
    return out;
  }

  // ||C x_1 A1 ... x_N AN||_F^2 = <C, C x_n (A_n^T A_n)>.
  double squared_norm() const {
    DenseTensor g = core;
    for (std::size_t n = 0; n < factors.size(); ++n) {
      g = ttm(g, factors[n].transpose() * factors[n], n);
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * core[i];
    return acc;
  }
};

// Weighted sum of rank-one terms: sum_r w_r a1_r o ... o aN_r.
struct CPModel {
  std::vector<Matrix> factors;
  Vector weights;

  std::size_t order() const { return factors.size(); }
  Eigen::Index rank() const { return weights.size(); }

  void validate() const {
    if (factors.empty()) throw dimension_error("cp model: no factors");
    for (const auto& a : factors) {
      if (a.cols() != weights.size()) throw dimension_error("cp model: factor column count differs from rank");
    }
    if (!weights.allFinite()) throw std::domain_error("cp model: non-finite weights");
  }

  // Hadamard product of all factor Gram matrices.
  Matrix gram_hadamard() const {
    Matrix h = Matrix::Ones(rank(), rank());
    for (const auto& a : factors) h.array() *= (a.transpose() * a).array();
    return h;
  }

  double squared_norm() const {
    validate();
    return weights.dot(gram_hadamard() * weights);
  }

  DenseTensor reconstruct() const {
    validate();
    Shape shape;
    for (const auto& a : factors) shape.push_back(static_cast<std::size_t>(a.rows()));
    // Reconstruct through the last-mode unfolding: T_(N)^T = KR(A1..A_{N-1}) diag(w) A_N^T.
    const std::size_t last = factors.size() - 1;
    Matrix full;
    if (last == 0) {
      full = factors[0] * weights;
      return DenseTensor(shape, std::vector<double>(full.data(), full.data() + full.size()));
    }
    const Matrix kr = khatri_rao(std::span(factors).first(last));
    full = factors[last] * weights.asDiagonal() * kr.transpose();
    return fold(full, last, shape);
  }
};

inline double inner(const DenseTensor& a, const DenseTensor& b) {
  if (a.shape() != b.shape()) throw dimension_error("inner: shapes differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// f = 1 - ||T - T~|| / ||T|| from the expanded squared residual.
inline double fitness_from_terms(double tensor_sq, double cross, double model_sq) {
  if (!(tensor_sq > 0.0)) throw std::domain_error("fitness: input tensor has zero norm");
  double resid_sq = tensor_sq - 2.0 * cross + model_sq;
  if (resid_sq < 0.0) {
    if (resid_sq < -1e-10 * tensor_sq) {
      throw std::domain_error("fitness: squared residual " + std::to_string(resid_sq) + " is negative");
    }
    resid_sq = 0.0;
  }
  return 1.0 - std::sqrt(resid_sq / tensor_sq);
}

template <TensorLike T>
double fitness(const T& t, const TuckerModel& model) {
  model.validate();
  const DenseTensor proj = ttmc_all(t, model.factors);
  return fitness_from_terms(t.squared_norm(), inner(proj, model.core), model.squared_norm());
}

template <TensorLike T>
double fitness(const T& t, const CPModel& model) {
  model.validate();
  const std::size_t last = model.order() - 1;
  const Matrix m = mttkrp(t, model.factors, last);
  const double cross = (m.array() * model.factors[last].array()).colwise().sum().matrix().dot(model.weights);
  return fitness_from_terms(t.squared_norm(), cross, model.squared_norm());
}

// Reference fitness through explicit reconstruction; used as an oracle.
inline double dense_fitness(const DenseTensor& t, const DenseTensor& approx) {
  if (t.shape() != approx.shape()) throw dimension_error("dense_fitness: shapes differ");
  double diff = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) diff += (t[i] - approx[i]) * (t[i] - approx[i]);
  return 1.0 - std::sqrt(diff) / t.norm();
}

}  // namespace rtucker
