#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "rtucker/model.hpp"
#include "rtucker/sketch.hpp"

namespace rtucker {

enum class SketchKind { none, tensorsketch, leverage_random, leverage_deterministic };
enum class InitKind { random, hosvd, rrf };

inline const char* to_string(SketchKind k) {
  switch (k) {
    case SketchKind::none: return "none";
    case SketchKind::tensorsketch: return "tensorsketch";
    case SketchKind::leverage_random: return "leverage-random";
    case SketchKind::leverage_deterministic: return "leverage-deterministic";
  }
  return "?";
}

inline const char* to_string(InitKind k) {
  switch (k) {
    case InitKind::random: return "random";
    case InitKind::hosvd: return "hosvd";
    case InitKind::rrf: return "rrf";
  }
  return "?";
}

struct TuckerConfig {
  Shape ranks;
  std::size_t max_sweeps = 5;
  SketchKind sketch = SketchKind::none;
  std::size_t sketch_size = 0;  // m; 0 derives m = K * R^2
  double K = 16.0;
  InitKind init = InitKind::hosvd;
  std::size_t rrf_width = 0;  // 0 derives ceil(sqrt(K) * R)
  std::uint64_t seed = 0;
  double convergence_tol = 0.0;

  std::size_t max_rank() const { return ranks.empty() ? 0 : *std::max_element(ranks.begin(), ranks.end()); }

  std::size_t resolved_sketch_size() const {
    if (sketch_size > 0) return sketch_size;
    const double r = static_cast<double>(max_rank());
    return static_cast<std::size_t>(std::ceil(K * r * r));
  }

  std::size_t resolved_rrf_width(std::size_t rank) const {
    if (rrf_width > 0) return std::max(rrf_width, rank);
    return std::max(rank, static_cast<std::size_t>(std::ceil(std::sqrt(K) * static_cast<double>(rank))));
  }

  void validate(const Shape& shape) const {
    if (ranks.size() != shape.size()) {
      throw dimension_error("tucker config: " + std::to_string(ranks.size()) + " ranks for an order-" +
                            std::to_string(shape.size()) + " tensor");
    }
    for (std::size_t n = 0; n < shape.size(); ++n) {
      if (ranks[n] < 1 || ranks[n] > shape[n]) {
        throw dimension_error("tucker config: rank " + std::to_string(ranks[n]) + " invalid for mode " +
                              std::to_string(n) + " of extent " + std::to_string(shape[n]));
      }
    }
    if (max_sweeps < 1) throw std::invalid_argument("tucker config: max_sweeps must be >= 1");
    if (sketch == SketchKind::none) return;
    if (sketch_size == 0 && !(K > 0.0)) throw std::invalid_argument("tucker config: K must be positive");
    const std::size_t m = resolved_sketch_size();
    for (std::size_t j = 0; j < shape.size(); ++j) {
      std::size_t need = 1;
      for (std::size_t n = 0; n < shape.size(); ++n) {
        if (n != j) need *= ranks[n];
      }
      if (m < need) {
        throw std::invalid_argument("tucker config: sketch size " + std::to_string(m) + " below " +
                                    std::to_string(need) + " unknowns of mode " + std::to_string(j));
      }
    }
  }
};

struct SweepTrace {
  std::vector<double> fitness;    // one per sweep
  std::vector<double> residuals;  // one per subproblem
  std::vector<double> wall_ms;    // one per sweep
  std::size_t sketch_size = 0;
  std::size_t redraws = 0;

  std::size_t sweeps() const { return fitness.size(); }
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

inline std::vector<Matrix> others(const std::vector<Matrix>& factors, std::size_t skip) {
  std::vector<Matrix> out;
  out.reserve(factors.size() - 1);
  for (std::size_t k = 0; k < factors.size(); ++k) {
    if (k != skip) out.push_back(factors[k]);
  }
  return out;
}

inline Shape others(const Shape& shape, std::size_t skip) {
  Shape out;
  for (std::size_t k = 0; k < shape.size(); ++k) {
    if (k != skip) out.push_back(shape[k]);
  }
  return out;
}

inline bool converged(const std::vector<double>& fit, double tol) {
  return tol > 0.0 && fit.size() >= 2 && std::abs(fit[fit.size() - 1] - fit[fit.size() - 2]) < tol;
}

// Above this flop count the HOSVD uses a randomized range finder instead of
// an explicit Gram matrix.
constexpr double kExactHosvdFlops = 5e8;
constexpr int kHosvdPowerIterations = 2;

}  // namespace detail

// Leading left singular vectors of one unfolding. Small problems use the Gram
// matrix; large ones a randomized range finder with power iterations.
inline Matrix leading_unfolding_vectors(const ModeUnfolding& unf, std::size_t rank, CounterRng& rng) {
  const auto r = static_cast<Eigen::Index>(rank);
  if (unf.gram_cost() <= detail::kExactHosvdFlops) return leading_left_singular_vectors(unf.gram(), r);
  const auto width = static_cast<Eigen::Index>(std::min(rank + static_cast<std::size_t>(kRsvdOversampling), unf.cols()));
  Matrix q = orthonormal_basis(unf.times(gaussian_matrix(static_cast<Eigen::Index>(unf.rows()), width, rng)));
  for (int it = 0; it < detail::kHosvdPowerIterations; ++it) q = orthonormal_basis(unf.times(unf.transpose_times(q)));
  const Matrix b = unf.transpose_times(q);  // T^T Q, so Q^T T = b^T
  const SvdResult svd = thin_svd(b.transpose());
  return complete_orthonormal(q * svd.u.leftCols(std::min(r, svd.u.cols())), r);
}

template <TensorLike T>
std::vector<Matrix> hosvd_init(const T& t, const Shape& ranks, CounterRng& rng) {
  if (ranks.size() != t.order()) throw dimension_error("hosvd_init: rank count differs from tensor order");
  std::vector<Matrix> factors;
  for (std::size_t n = 0; n < t.order(); ++n) {
    if (ranks[n] > t.extent(n)) throw dimension_error("hosvd_init: rank exceeds extent in mode " + std::to_string(n));
    CounterRng sub = rng.split(n);
    factors.push_back(leading_unfolding_vectors(ModeUnfolding(t, n), ranks[n], sub));
  }
  return factors;
}

// Full k-width orthonormal basis of T_(n) S for a composite sketch S.
inline Matrix rrf_basis(const ModeUnfolding& unf, std::size_t width, CounterRng& rng, std::size_t rank) {
  if (width < rank) throw std::invalid_argument("init_rrf: width must be >= rank");
  const CompositeSketchOp op(unf.rows(), width, rank * rank + width, rng);
  const Matrix b = op.apply(unf);
  return thin_svd(b).u;
}

inline Matrix rrf_basis(const Matrix& m, std::size_t width, CounterRng& rng, std::size_t rank) {
  if (width < rank) throw std::invalid_argument("init_rrf: width must be >= rank");
  const CompositeSketchOp op(static_cast<std::size_t>(m.cols()), width, rank * rank + width, rng);
  return thin_svd(op.apply(m)).u;
}

// First R left singular vectors of the sketched unfolding, completed to R
// orthonormal columns if the sketch has lower rank.
inline Matrix init_rrf(const ModeUnfolding& unf, std::size_t rank, std::size_t width, CounterRng& rng) {
  const Matrix u = rrf_basis(unf, width, rng, rank);
  return complete_orthonormal(u.leftCols(std::min<Eigen::Index>(u.cols(), static_cast<Eigen::Index>(rank))),
                              static_cast<Eigen::Index>(rank));
}

inline Matrix init_rrf(const Matrix& m, std::size_t rank, std::size_t width, CounterRng& rng) {
  const Matrix u = rrf_basis(m, width, rng, rank);
  return complete_orthonormal(u.leftCols(std::min<Eigen::Index>(u.cols(), static_cast<Eigen::Index>(rank))),
                              static_cast<Eigen::Index>(rank));
}

// Initial factors for every mode except those in `skip_modes`, which get
// zero placeholders.
template <TensorLike T>
std::vector<Matrix> initial_factors(const T& t, const TuckerConfig& cfg, CounterRng rng, std::size_t first_mode) {
  std::vector<Matrix> factors(t.order());
  for (std::size_t n = 0; n < t.order(); ++n) {
    const auto s = static_cast<Eigen::Index>(t.extent(n));
    const auto r = static_cast<Eigen::Index>(cfg.ranks[n]);
    if (n < first_mode) {
      factors[n] = Matrix::Zero(s, r);
      continue;
    }
    CounterRng sub = rng.split(n);
    switch (cfg.init) {
      case InitKind::random: factors[n] = random_orthonormal(s, r, sub); break;
      case InitKind::hosvd: factors[n] = leading_unfolding_vectors(ModeUnfolding(t, n), cfg.ranks[n], sub); break;
      case InitKind::rrf:
        factors[n] = init_rrf(ModeUnfolding(t, n), cfg.ranks[n], cfg.resolved_rrf_width(cfg.ranks[n]), sub);
        break;
    }
  }
  return factors;
}

// Exact ALS (HOOI): every subproblem updates one factor and the core.
template <TensorLike T>
std::pair<TuckerModel, SweepTrace> hooi(const T& t, const TuckerConfig& cfg) {
  cfg.validate(t.shape());
  if (cfg.sketch != SketchKind::none) throw std::invalid_argument("hooi: config requests a sketch");
  const double tsq = t.squared_norm();
  if (!(tsq > 0.0)) throw std::domain_error("hooi: input tensor has zero norm");
  const CounterRng rng(cfg.seed);
  TuckerModel model;
  model.factors = initial_factors(t, cfg, rng.split("init"), 0);
  SweepTrace trace;
  const std::size_t order = t.order();
  for (std::size_t sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    const auto start = detail::Clock::now();
    DenseTensor y;
    for (std::size_t n = 0; n < order; ++n) {
      y = ttmc(t, std::span<const Matrix>(model.factors), n);
      const SvdResult svd = thin_svd(matricize(y, n));
      const auto r = static_cast<Eigen::Index>(cfg.ranks[n]);
      model.factors[n] = complete_orthonormal(svd.u.leftCols(std::min(r, svd.u.cols())), r);
      const double kept = svd.singular_values.head(std::min(r, svd.singular_values.size())).squaredNorm();
      trace.residuals.push_back(std::sqrt(std::max(0.0, tsq - kept)));
    }
    model.core = ttm(y, model.factors[order - 1].transpose(), order - 1);
    const double resid_sq = std::max(0.0, tsq - model.core.squared_norm());
    trace.fitness.push_back(1.0 - std::sqrt(resid_sq / tsq));
    trace.wall_ms.push_back(detail::elapsed_ms(start));
    if (detail::converged(trace.fitness, cfg.convergence_tol)) break;
  }
  return {std::move(model), std::move(trace)};
}

namespace detail {

// TensorSketch of vec(T) (all modes), one pass over the stored entries.
inline Vector ts_apply_vec(const TensorSketchOp& ts, const DenseTensor& t) {
  return ts.apply_rhs(Matrix(ConstMatrixMap(t.data().data(), static_cast<Eigen::Index>(t.size()), 1)));
}

inline Vector ts_apply_vec(const TensorSketchOp& ts, const SparseTensor& t) {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(ts.sketch_size()));
  std::vector<std::size_t> idx(t.order());
  for (std::size_t k = 0; k < t.nnz(); ++k) {
    for (std::size_t m = 0; m < t.order(); ++m) idx[m] = t.index(k, m);
    out[static_cast<Eigen::Index>(ts.hash(idx))] += ts.sign(idx) * t.value(k);
  }
  return out;
}

// Sketched system (S P, S T_(n)^T) for one subproblem. TensorSketch operators
// and their right-hand sides are cached by the caller across sweeps.
struct ModeSketchCache {
  std::optional<TensorSketchOp> ts;
  Matrix rhs;
};

inline SketchedSystem sketch_subproblem(SketchKind kind, std::size_t m, const std::vector<Matrix>& others,
                                        const ModeUnfolding& unf, ModeSketchCache& cache, CounterRng& rng,
                                        RowProduct product = RowProduct::kronecker) {
  if (kind == SketchKind::tensorsketch) {
    if (!cache.ts) {
      Shape ext;
      for (const auto& a : others) ext.push_back(static_cast<std::size_t>(a.rows()));
      cache.ts.emplace(ext, m, rng);
      cache.rhs = cache.ts->apply_rhs(unf);
    }
    if (product != RowProduct::kronecker) throw std::invalid_argument("TensorSketch supports Kronecker chains only");
    return {cache.ts->apply_kron(others), cache.rhs};
  }
  const auto variant = kind == SketchKind::leverage_deterministic ? SamplingVariant::deterministic : SamplingVariant::random;
  const LevSamplerOp op = lev_build(others, m, variant, rng);
  return lev_apply(op, others, unf, product);
}

}  // namespace detail

// Sketched rank-constrained ALS: each subproblem sketches
// min ||P C_(n)^T A^T - T_(n)^T|| and solves it with rsvd_lrls, updating the
// factor and the core together.
template <TensorLike T>
std::pair<TuckerModel, SweepTrace> sketched_tucker_als(const T& t, const TuckerConfig& cfg) {
  cfg.validate(t.shape());
  if (cfg.sketch == SketchKind::none) throw std::invalid_argument("sketched_tucker_als: config has no sketch");
  if (!(t.squared_norm() > 0.0)) throw std::domain_error("sketched_tucker_als: input tensor has zero norm");
  const CounterRng root(cfg.seed);
  const std::size_t order = t.order();
  const std::size_t m = cfg.resolved_sketch_size();

  TuckerModel model;
  // The first mode is produced by its own first subproblem.
  model.factors = initial_factors(t, cfg, root.split("init"), 1);
  Shape core_shape = cfg.ranks;
  model.core = DenseTensor(core_shape);

  std::vector<ModeUnfolding> unfoldings;
  for (std::size_t n = 0; n < order; ++n) unfoldings.emplace_back(t, n);
  std::vector<detail::ModeSketchCache> caches(order);
  CounterRng sketch_rng = root.split("sketch");
  CounterRng solve_rng = root.split("solve");

  SweepTrace trace;
  trace.sketch_size = m;
  Matrix last_core_t;
  for (std::size_t sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    const auto start = detail::Clock::now();
    for (std::size_t n = 0; n < order; ++n) {
      const std::vector<Matrix> rest = detail::others(model.factors, n);
      LowRankSolution sol;
      for (int attempt = 0;; ++attempt) {
        try {
          const SketchedSystem sys = detail::sketch_subproblem(cfg.sketch, m, rest, unfoldings[n], caches[n], sketch_rng);
          sol = rsvd_lrls(sys.z, sys.y, static_cast<Eigen::Index>(cfg.ranks[n]), solve_rng);
          trace.residuals.push_back((sys.z * sol.solution() - sys.y).norm());
          break;
        } catch (const degenerate_input& e) {
          if (attempt > 0 || cfg.sketch == SketchKind::leverage_deterministic) {
            throw degenerate_input("sketched_tucker_als: sweep " + std::to_string(sweep) + ", mode " + std::to_string(n) +
                                   ", sketch size " + std::to_string(m) + ": " + e.what());
          }
          caches[n] = {};  // redraw
          ++trace.redraws;
        }
      }
      model.factors[n] = sol.vr;
      // C_(n)^T = core_t, so C_(n) = core_t^T.
      model.core = fold(sol.core_t.transpose(), n, core_shape);
    }
    trace.fitness.push_back(fitness(t, model));
    trace.wall_ms.push_back(detail::elapsed_ms(start));
    if (detail::converged(trace.fitness, cfg.convergence_tol)) break;
  }
  return {std::move(model), std::move(trace)};
}

// Reference baseline: each sweep solves N unconstrained sketched problems,
// one per factor with the core fixed, then one for the core with every
// factor fixed. All TensorSketches are drawn once.
template <TensorLike T>
std::pair<TuckerModel, SweepTrace> ref_tucker_ts(const T& t, const TuckerConfig& cfg) {
  cfg.validate(t.shape());
  if (cfg.sketch != SketchKind::tensorsketch) throw std::invalid_argument("ref_tucker_ts: requires the tensorsketch sketch");
  if (!(t.squared_norm() > 0.0)) throw std::domain_error("ref_tucker_ts: input tensor has zero norm");
  const CounterRng root(cfg.seed);
  const std::size_t order = t.order();
  const std::size_t m = cfg.resolved_sketch_size();
  std::size_t core_unknowns = shape_product(cfg.ranks);
  if (m < core_unknowns) {
    throw std::invalid_argument("ref_tucker_ts: sketch size " + std::to_string(m) + " below " +
                                std::to_string(core_unknowns) + " core unknowns");
  }

  TuckerModel model;
  model.factors = initial_factors(t, cfg, root.split("init"), 0);
  CounterRng sketch_rng = root.split("sketch");
  std::vector<TensorSketchOp> mode_ts;
  std::vector<Matrix> mode_rhs;
  for (std::size_t n = 0; n < order; ++n) {
    mode_ts.emplace_back(detail::others(t.shape(), n), m, sketch_rng);
    mode_rhs.push_back(mode_ts.back().apply_rhs(ModeUnfolding(t, n)));
  }
  const TensorSketchOp core_ts(t.shape(), m, sketch_rng);
  const Vector core_rhs = detail::ts_apply_vec(core_ts, t);

  auto solve_core = [&](SweepTrace& tr) {
    const Matrix z = core_ts.apply_kron(model.factors);
    const Matrix g = lstsq(z, core_rhs);
    tr.residuals.push_back((z * g - core_rhs).norm());
    model.core = DenseTensor(cfg.ranks, std::vector<double>(g.data(), g.data() + g.size()));
  };

  SweepTrace trace;
  trace.sketch_size = m;
  solve_core(trace);
  trace.residuals.clear();
  for (std::size_t sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    const auto start = detail::Clock::now();
    for (std::size_t n = 0; n < order; ++n) {
      const Matrix sp = mode_ts[n].apply_kron(detail::others(model.factors, n));
      const Matrix z = sp * matricize(model.core, n).transpose();  // m x R_n
      const Matrix at = lstsq(z, mode_rhs[n]);                      // R_n x s_n
      trace.residuals.push_back((z * at - mode_rhs[n]).norm());
      // Re-orthonormalize and push the triangular factor into the core so the
      // model is unchanged.
      const QrResult qr = reduced_qr(at.transpose());
      model.factors[n] = qr.q;
      model.core = ttm(model.core, qr.r, n);
    }
    solve_core(trace);
    trace.fitness.push_back(fitness(t, model));
    trace.wall_ms.push_back(detail::elapsed_ms(start));
    if (detail::converged(trace.fitness, cfg.convergence_tol)) break;
  }
  return {std::move(model), std::move(trace)};
}

// Dispatch on the configured sketch.
template <TensorLike T>
std::pair<TuckerModel, SweepTrace> tucker_als(const T& t, const TuckerConfig& cfg) {
  return cfg.sketch == SketchKind::none ? hooi(t, cfg) : sketched_tucker_als(t, cfg);
}

}  // namespace rtucker
