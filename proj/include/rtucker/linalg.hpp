#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rtucker/random.hpp"
#include "rtucker/tensor.hpp"

namespace rtucker {

// Raised when a factorization meets a (numerically) rank-deficient input it
// cannot handle.
class degenerate_input : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class convergence_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QrResult {
  Matrix q;  // s x R, orthonormal columns
  Matrix r;  // R x R, upper triangular with non-negative diagonal
};

struct SvdResult {
  Matrix u;                 // m x k
  Vector singular_values;   // k, non-increasing
  Matrix v;                 // n x k
  int sweeps = 0;           // Jacobi sweeps used

  Matrix reconstruct() const { return u * singular_values.asDiagonal() * v.transpose(); }
};

struct LeverageProfile {
  std::vector<double> scores;
  std::size_t rank = 0;

  // Sampling probabilities scores / rank.
  std::vector<double> probabilities() const {
    std::vector<double> p(scores.size());
    const double total = std::accumulate(scores.begin(), scores.end(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = scores[i] / total;
    return p;
  }
};

inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, CounterRng& rng, double stddev = 1.0) {
  Matrix g(rows, cols);
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = dist(rng);
  return g;
}

// Orthonormal basis (thin Householder Q) of the column space of M. Unlike
// reduced_qr this never rejects rank-deficient input.
inline Matrix orthonormal_basis(const Matrix& m) {
  const Eigen::Index k = std::min(m.rows(), m.cols());
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Matrix q = qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), k);
  return q;
}

// Extends the orthonormal columns of `q` (s x k) to s x target orthonormal
// columns.
inline Matrix complete_orthonormal(const Matrix& q, Eigen::Index target) {
  const Eigen::Index s = q.rows();
  if (target > s) throw dimension_error("complete_orthonormal: more columns than rows");
  if (q.cols() >= target) return q.leftCols(target);
  Matrix out(s, target);
  out.leftCols(q.cols()) = q;
  if (q.cols() == 0) {
    out = Eigen::MatrixXd::Identity(s, target);
    return out;
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr{Eigen::MatrixXd(q)};
  const Eigen::MatrixXd full = qr.householderQ() * Eigen::MatrixXd::Identity(s, s);
  out.rightCols(target - q.cols()) = full.middleCols(q.cols(), target - q.cols());
  return out;
}

inline Matrix random_orthonormal(Eigen::Index rows, Eigen::Index cols, CounterRng& rng) {
  return orthonormal_basis(gaussian_matrix(rows, cols, rng));
}

inline QrResult reduced_qr(const Matrix& m) {
  const Eigen::Index s = m.rows();
  const Eigen::Index r = m.cols();
  if (s < r) throw dimension_error("reduced_qr: need rows >= cols, got " + std::to_string(s) + "x" + std::to_string(r));
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  QrResult out;
  out.q = qr.householderQ() * Eigen::MatrixXd::Identity(s, r);
  out.r = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  const double cutoff = 1e-12 * m.norm();
  for (Eigen::Index i = 0; i < r; ++i) {
    if (std::abs(out.r(i, i)) <= cutoff) {
      throw degenerate_input("reduced_qr: column " + std::to_string(i) + " is numerically dependent (|R_ii| = " +
                             std::to_string(std::abs(out.r(i, i))) + ")");
    }
    if (out.r(i, i) < 0.0) {
      out.r.row(i) *= -1.0;
      out.q.col(i) *= -1.0;
    }
  }
  return out;
}

namespace detail {

constexpr double kJacobiTol = 1e-12;
constexpr int kJacobiMaxSweeps = 100;

// One-sided (Hestenes) Jacobi on a square-or-tall column-major matrix.
// On return the columns of w are mutually orthogonal and w = A v.
inline int hestenes(Eigen::MatrixXd& w, Eigen::MatrixXd& v) {
  const Eigen::Index n = w.cols();
  v = Eigen::MatrixXd::Identity(n, n);
  double worst = 0.0;
  for (int sweep = 1; sweep <= kJacobiMaxSweeps; ++sweep) {
    worst = 0.0;
    // Columns at roundoff level relative to the largest one are numerically
    // zero; rotating them only reshuffles noise.
    const double floor = w.colwise().squaredNorm().maxCoeff() * 1e-30;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double alpha = w.col(p).squaredNorm();
        const double beta = w.col(q).squaredNorm();
        const double gamma = w.col(p).dot(w.col(q));
        if (alpha <= floor || beta <= floor) continue;
        const double ratio = std::abs(gamma) / std::sqrt(alpha * beta);
        worst = std::max(worst, ratio);
        if (ratio <= kJacobiTol) continue;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (auto* mat : {&w, &v}) {
          for (Eigen::Index i = 0; i < mat->rows(); ++i) {
            const double xp = (*mat)(i, p);
            const double xq = (*mat)(i, q);
            (*mat)(i, p) = c * xp - s * xq;
            (*mat)(i, q) = s * xp + c * xq;
          }
        }
      }
    }
    if (worst <= kJacobiTol) return sweep;
  }
  std::ostringstream msg;
  msg << "thin_svd: Jacobi iteration did not converge in " << kJacobiMaxSweeps
      << " sweeps (largest normalized off-diagonal " << worst << ", size " << w.rows() << "x" << n << ")";
  throw convergence_error(msg.str());
}

inline SvdResult svd_tall(const Matrix& a) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  Eigen::MatrixXd w;
  Eigen::MatrixXd qbasis;
  const bool precondition = m > n;
  if (precondition) {
    // QR first so the rotations act on an n x n triangle.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    qbasis = qr.householderQ() * Eigen::MatrixXd::Identity(m, n);
    w = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  } else {
    w = a;
  }
  Eigen::MatrixXd v;
  SvdResult out;
  out.sweeps = hestenes(w, v);

  Vector sigma = w.colwise().norm().transpose();
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::stable_sort(perm.begin(), perm.end(), [&](Eigen::Index x, Eigen::Index y) { return sigma(x) > sigma(y); });

  const double smax = n > 0 ? sigma(perm[0]) : 0.0;
  const double zero_cut = std::max<double>(static_cast<double>(std::max(m, n)) *
                                               std::numeric_limits<double>::epsilon() * smax,
                                           std::numeric_limits<double>::min());
  Eigen::MatrixXd u_small(w.rows(), n);
  out.singular_values.resize(n);
  out.v.resize(n, n);
  Eigen::Index valid = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index src = perm[static_cast<std::size_t>(j)];
    out.singular_values(j) = sigma(src);
    out.v.col(j) = v.col(src);
    if (sigma(src) > zero_cut) {
      u_small.col(j) = w.col(src) / sigma(src);
      ++valid;
    }
  }
  Matrix u_part = u_small.leftCols(valid);
  Matrix u_full = complete_orthonormal(u_part, n);
  out.u = precondition ? Matrix(qbasis * u_full) : u_full;
  return out;
}

}  // namespace detail

// Thin SVD, k = min(m, n). One-sided Jacobi with QR preconditioning for tall
// inputs; wide inputs are handled through the transpose.
inline SvdResult thin_svd(const Matrix& m) {
  if (!m.allFinite()) throw std::domain_error("thin_svd: non-finite input");
  if (m.rows() >= m.cols()) return detail::svd_tall(m);
  SvdResult t = detail::svd_tall(m.transpose());
  std::swap(t.u, t.v);
  return t;
}

inline SvdResult truncated_svd(const Matrix& m, Eigen::Index rank) {
  if (rank < 0 || rank > std::min(m.rows(), m.cols())) {
    throw dimension_error("truncated_svd: rank " + std::to_string(rank) + " exceeds min(rows, cols)");
  }
  SvdResult full = thin_svd(m);
  full.u.conservativeResize(Eigen::NoChange, rank);
  full.v.conservativeResize(Eigen::NoChange, rank);
  full.singular_values.conservativeResize(rank);
  return full;
}

// Leading `rank` left singular vectors; pads with an orthonormal complement
// when `rank` exceeds min(rows, cols).
inline Matrix leading_left_singular_vectors(const Matrix& m, Eigen::Index rank) {
  if (rank > m.rows()) throw dimension_error("leading_left_singular_vectors: rank exceeds row count");
  const SvdResult svd = thin_svd(m);
  if (rank <= svd.u.cols()) return svd.u.leftCols(rank);
  return complete_orthonormal(svd.u, rank);
}

inline LeverageProfile leverage_scores(const Matrix& a) {
  if (a.rows() < a.cols()) {
    throw dimension_error("leverage_scores: need rows >= cols, got " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()));
  }
  const QrResult qr = reduced_qr(a);
  LeverageProfile out;
  out.rank = static_cast<std::size_t>(a.cols());
  out.scores.resize(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) out.scores[static_cast<std::size_t>(i)] = qr.q.row(i).squaredNorm();
  return out;
}

// Least-squares solution of min ||Z X - Y||_F through a reduced QR of Z.
inline Matrix lstsq(const Matrix& z, const Matrix& y) {
  if (z.rows() != y.rows()) throw dimension_error("lstsq: row counts differ");
  const QrResult qr = reduced_qr(z);
  return qr.r.triangularView<Eigen::Upper>().solve(qr.q.transpose() * y);
}

// Moore-Penrose pseudo-inverse with singular values below cutoff * sigma_max
// treated as zero.
inline Matrix pseudo_inverse(const Matrix& m, double rel_cutoff = 1e-12) {
  const SvdResult svd = thin_svd(m);
  const double smax = svd.singular_values.size() ? svd.singular_values(0) : 0.0;
  Vector inv = svd.singular_values;
  for (Eigen::Index i = 0; i < inv.size(); ++i) inv(i) = (inv(i) > rel_cutoff * smax && inv(i) > 0.0) ? 1.0 / inv(i) : 0.0;
  return svd.v * inv.asDiagonal() * svd.u.transpose();
}

// Rank-R factorization core_t * vr^T of the best rank-R approximation of
// argmin ||Z X - Y||_F.
struct LowRankSolution {
  Matrix core_t;  // r x R, left factor scaled by the singular values
  Matrix vr;      // s x R, orthonormal columns
  Matrix solution() const { return core_t * vr.transpose(); }
};

// Gaussian range-finder width used by rsvd_lrls: R plus this oversampling.
constexpr Eigen::Index kRsvdOversampling = 10;

inline LowRankSolution rsvd_lrls(const Matrix& z, const Matrix& y, Eigen::Index rank, CounterRng& rng) {
  const Eigen::Index m = z.rows();
  const Eigen::Index r = z.cols();
  const Eigen::Index s = y.cols();
  if (y.rows() != m) throw dimension_error("rsvd_lrls: Z and Y row counts differ");
  if (m < r) throw dimension_error("rsvd_lrls: need at least as many rows as unknowns (" + std::to_string(m) + " < " + std::to_string(r) + ")");
  if (rank < 1 || rank > std::min(r, s)) {
    throw dimension_error("rsvd_lrls: rank " + std::to_string(rank) + " exceeds min(r, cols(Y)) = " +
                          std::to_string(std::min(r, s)));
  }
  // Z^T Z is never formed: X = R^{-1} Q^T Y.
  const QrResult qr = reduced_qr(z);
  const Matrix x = qr.r.triangularView<Eigen::Upper>().solve(qr.q.transpose() * y);

  const Eigen::Index width = std::min(rank + kRsvdOversampling, s);
  const Matrix sketch = gaussian_matrix(s, width, rng);
  const Matrix basis = orthonormal_basis(x * sketch);   // r x min(r, width)
  const Matrix d = basis.transpose() * x;               // k x s
  const SvdResult svd = thin_svd(d);

  LowRankSolution out;
  out.core_t = basis * svd.u.leftCols(rank) * svd.singular_values.head(rank).asDiagonal();
  out.vr = svd.v.leftCols(rank);
  return out;
}

}  // namespace rtucker
