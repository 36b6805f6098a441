#pragma once

#include <cmath>
#include <vector>

#include "rtucker/tucker.hpp"

namespace rtucker {

struct CPConfig {
  std::size_t rank = 1;
  std::size_t max_sweeps = 30;
  std::size_t core_sweeps = 25;  // CP sweeps on the Tucker core
  SketchKind sketch = SketchKind::none;
  std::size_t sketch_size = 0;  // m; 0 derives m = K * R^2
  double K = 16.0;
  InitKind init = InitKind::rrf;
  std::size_t rrf_width = 0;
  std::uint64_t seed = 0;
  std::size_t tucker_sweeps = 5;
  double convergence_tol = 0.0;

  std::size_t resolved_sketch_size() const {
    if (sketch_size > 0) return sketch_size;
    const double r = static_cast<double>(rank);
    return static_cast<std::size_t>(std::ceil(K * r * r));
  }

  void validate() const {
    if (rank < 1) throw std::invalid_argument("cp config: rank must be >= 1");
    if (max_sweeps < 1) throw std::invalid_argument("cp config: max_sweeps must be >= 1");
    if (sketch == SketchKind::tensorsketch) throw std::invalid_argument("cp config: TensorSketch is not supported for CP");
    if (sketch != SketchKind::none && resolved_sketch_size() < rank) {
      throw std::invalid_argument("cp config: sketch size below rank");
    }
  }
};

// Smallest 1-based sweep after which every later per-sweep fitness change is
// below tol; size() + 1 when the last change is still at least tol.
inline std::size_t plateau_sweep(const std::vector<double>& fit, double tol = 1e-3) {
  const std::size_t n = fit.size();
  if (n >= 2 && std::abs(fit[n - 1] - fit[n - 2]) >= tol) return n + 1;
  std::size_t k = n;
  while (k >= 2 && std::abs(fit[k - 1] - fit[k - 2]) < tol) --k;
  return k;
}

namespace detail {

// Scale columns to unit norm; returns the scales. Zero columns keep scale 0.
inline Vector normalize_columns(Matrix& a) {
  Vector scale(a.cols());
  for (Eigen::Index r = 0; r < a.cols(); ++r) {
    const double nrm = a.col(r).norm();
    scale[r] = nrm;
    if (nrm > 0.0) a.col(r) /= nrm;
  }
  return scale;
}

inline Matrix gram_hadamard_except(const std::vector<Matrix>& factors, std::size_t skip) {
  const Eigen::Index r = factors[0].cols();
  Matrix h = Matrix::Ones(r, r);
  for (std::size_t k = 0; k < factors.size(); ++k) {
    if (k != skip) h.array() *= (factors[k].transpose() * factors[k]).array();
  }
  return h;
}

template <TensorLike T>
std::vector<Matrix> cp_initial_factors(const T& t, const CPConfig& cfg, CounterRng rng) {
  std::vector<Matrix> factors;
  const auto r = static_cast<Eigen::Index>(cfg.rank);
  const std::size_t width = std::max(cfg.rank, cfg.rrf_width > 0 ? cfg.rrf_width
                                                                  : static_cast<std::size_t>(std::ceil(std::sqrt(cfg.K) * static_cast<double>(cfg.rank))));
  for (std::size_t n = 0; n < t.order(); ++n) {
    CounterRng sub = rng.split(n);
    const auto s = static_cast<Eigen::Index>(t.extent(n));
    switch (cfg.init) {
      case InitKind::random: {
        Matrix a(s, r);
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = uniform01(sub);
        factors.push_back(std::move(a));
        break;
      }
      case InitKind::rrf: {
        if (cfg.rank > t.extent(n)) throw dimension_error("cp rrf init: rank exceeds extent of mode " + std::to_string(n));
        factors.push_back(init_rrf(ModeUnfolding(t, n), cfg.rank, width, sub));
        break;
      }
      case InitKind::hosvd: {
        // Leading singular vectors used directly; extra columns are random
        // when the rank exceeds the extent.
        const std::size_t k = std::min(cfg.rank, t.extent(n));
        Matrix a = leading_unfolding_vectors(ModeUnfolding(t, n), k, sub);
        if (k < cfg.rank) {
          Matrix full(s, r);
          full.leftCols(static_cast<Eigen::Index>(k)) = a;
          full.rightCols(r - static_cast<Eigen::Index>(k)) = gaussian_matrix(s, r - static_cast<Eigen::Index>(k), sub);
          a = std::move(full);
        }
        factors.push_back(std::move(a));
        break;
      }
    }
  }
  return factors;
}

// Fitness of the model against `eval` (whose squared norm is replaced by
// eval_sq), through the last-mode MTTKRP.
template <TensorLike T>
double cp_fitness_against(const T& eval, double eval_sq, const CPModel& model) {
  const std::size_t last = model.order() - 1;
  const Matrix m = mttkrp(eval, model.factors, last);
  const double cross = (m.array() * model.factors[last].array()).colwise().sum().matrix().dot(model.weights.transpose());
  return fitness_from_terms(eval_sq, cross, model.squared_norm());
}

// CP-ALS core loop. When `sketch` is set each subproblem is solved on
// leverage-sampled Khatri-Rao rows; otherwise by the normal equations with a
// pseudo-inverse of the Gram Hadamard product. Per-sweep fitness is measured
// against `eval` with squared norm eval_sq.
template <TensorLike T, TensorLike E>
std::pair<CPModel, SweepTrace> cp_als_loop(const T& t, std::vector<Matrix> factors, const CPConfig& cfg,
                                           std::size_t sweeps, const E& eval, double eval_sq, CounterRng rng) {
  const std::size_t order = t.order();
  const double tsq = t.squared_norm();
  CPModel model;
  model.weights = Vector::Ones(static_cast<Eigen::Index>(cfg.rank));
  for (auto& a : factors) normalize_columns(a);
  model.factors = std::move(factors);

  std::vector<ModeUnfolding> unfoldings;
  if (cfg.sketch != SketchKind::none) {
    for (std::size_t n = 0; n < order; ++n) unfoldings.emplace_back(t, n);
  }
  const std::size_t m = cfg.resolved_sketch_size();
  SweepTrace trace;
  trace.sketch_size = cfg.sketch == SketchKind::none ? 0 : m;
  for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
    const auto start = Clock::now();
    for (std::size_t n = 0; n < order; ++n) {
      Matrix a;
      if (cfg.sketch == SketchKind::none) {
        const Matrix mk = mttkrp(t, model.factors, n);
        a = mk * pseudo_inverse(gram_hadamard_except(model.factors, n));
        // Residual of the updated model from the MTTKRP already at hand.
        const Matrix h = gram_hadamard_except(model.factors, n);
        const double cross = (mk.array() * a.array()).sum();
        const double msq = (h.array() * (a.transpose() * a).array()).sum();
        trace.residuals.push_back(std::sqrt(std::max(0.0, tsq - 2.0 * cross + msq)));
      } else {
        const std::vector<Matrix> rest = others(model.factors, n);
        const auto variant = cfg.sketch == SketchKind::leverage_deterministic ? SamplingVariant::deterministic
                                                                              : SamplingVariant::random;
        const LevSamplerOp op = lev_build(rest, m, variant, rng);
        const SketchedSystem sys = lev_apply(op, rest, unfoldings[n], RowProduct::khatri_rao);
        const Matrix at = pseudo_inverse(sys.z) * sys.y;  // R x s_n
        trace.residuals.push_back((sys.z * at - sys.y).norm());
        a = at.transpose();
      }
      model.weights = normalize_columns(a);
      model.factors[n] = std::move(a);
    }
    trace.fitness.push_back(cp_fitness_against(eval, eval_sq, model));
    trace.wall_ms.push_back(elapsed_ms(start));
    if (converged(trace.fitness, cfg.convergence_tol)) break;
  }
  return {std::move(model), std::move(trace)};
}

}  // namespace detail

template <TensorLike T>
std::pair<CPModel, SweepTrace> cp_als(const T& t, const CPConfig& cfg) {
  cfg.validate();
  if (cfg.sketch != SketchKind::none) throw std::invalid_argument("cp_als: config requests a sketch");
  const double tsq = t.squared_norm();
  if (!(tsq > 0.0)) throw std::domain_error("cp_als: input tensor has zero norm");
  const CounterRng root(cfg.seed);
  auto factors = detail::cp_initial_factors(t, cfg, root.split("init"));
  return detail::cp_als_loop(t, std::move(factors), cfg, cfg.max_sweeps, t, tsq, root.split("sketch"));
}

template <TensorLike T>
std::pair<CPModel, SweepTrace> sketched_cp_als(const T& t, const CPConfig& cfg) {
  cfg.validate();
  if (cfg.sketch == SketchKind::none) throw std::invalid_argument("sketched_cp_als: config has no sketch");
  const double tsq = t.squared_norm();
  if (!(tsq > 0.0)) throw std::domain_error("sketched_cp_als: input tensor has zero norm");
  const CounterRng root(cfg.seed);
  auto factors = detail::cp_initial_factors(t, cfg, root.split("init"));
  return detail::cp_als_loop(t, std::move(factors), cfg, cfg.max_sweeps, t, tsq, root.split("sketch"));
}

struct TuckerCPResult {
  CPModel model;
  SweepTrace trace;         // Tucker sweeps followed by CP sweeps, all against T
  SweepTrace tucker_trace;  // Tucker stage alone
  SweepTrace core_trace;    // CP stage alone
  TuckerModel tucker;
  double projection_fitness = 0.0;  // best fitness over cores for the Tucker factors
};

// CP through Tucker compression: a (sketched) Tucker stage with ranks
// (R..R), CP-ALS on the core, then factors B^(n) A^(n). The Tucker stage is
// HOOI when the config has no sketch.
template <TensorLike T>
TuckerCPResult cp_via_sketched_tucker(const T& t, const CPConfig& cfg) {
  cfg.validate();
  const double tsq = t.squared_norm();
  if (!(tsq > 0.0)) throw std::domain_error("cp_via_sketched_tucker: input tensor has zero norm");
  for (std::size_t n = 0; n < t.order(); ++n) {
    if (cfg.rank > t.extent(n)) throw dimension_error("cp_via_sketched_tucker: rank exceeds extent of mode " + std::to_string(n));
  }
  const CounterRng root(cfg.seed);
  TuckerConfig tc;
  tc.ranks.assign(t.order(), cfg.rank);
  tc.max_sweeps = cfg.tucker_sweeps;
  tc.sketch = cfg.sketch;
  tc.sketch_size = cfg.sketch_size;
  tc.K = cfg.K;
  tc.init = cfg.sketch == SketchKind::none ? InitKind::hosvd : InitKind::rrf;
  tc.rrf_width = cfg.rrf_width;
  tc.seed = root.split("tucker").key();

  TuckerCPResult out;
  std::tie(out.tucker, out.tucker_trace) = tucker_als(t, tc);

  // The CP stage is scored against T: with orthonormal B,
  // <T, B-model> = <ttmc(T, B), model> and ||B-model|| = ||model||.
  const DenseTensor projected = ttmc_all(t, out.tucker.factors);
  out.projection_fitness = fitness_from_terms(tsq, projected.squared_norm(), projected.squared_norm());

  CPConfig core_cfg = cfg;
  core_cfg.sketch = SketchKind::none;
  core_cfg.init = InitKind::hosvd;
  CounterRng core_rng = root.split("core");
  auto init = detail::cp_initial_factors(out.tucker.core, core_cfg, core_rng.split("init"));
  CPModel core_model;
  std::tie(core_model, out.core_trace) =
      detail::cp_als_loop(out.tucker.core, std::move(init), core_cfg, cfg.core_sweeps, projected, tsq, core_rng.split("sketch"));

  out.model.weights = core_model.weights;
  for (std::size_t n = 0; n < t.order(); ++n) out.model.factors.push_back(out.tucker.factors[n] * core_model.factors[n]);

  out.trace = out.tucker_trace;
  out.trace.fitness.insert(out.trace.fitness.end(), out.core_trace.fitness.begin(), out.core_trace.fitness.end());
  out.trace.residuals.insert(out.trace.residuals.end(), out.core_trace.residuals.begin(), out.core_trace.residuals.end());
  out.trace.wall_ms.insert(out.trace.wall_ms.end(), out.core_trace.wall_ms.begin(), out.core_trace.wall_ms.end());
  return out;
}

}  // namespace rtucker
