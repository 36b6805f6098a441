#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "rtucker/kernels.hpp"
#include "rtucker/linalg.hpp"
#include "rtucker/model.hpp"

namespace rtucker {

enum class Family { tucker_dense, tucker_lowrank_signal, tucker_sparse, coherent, cp_sparse };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::tucker_dense: return "tucker-dense";
    case Family::tucker_lowrank_signal: return "tucker-lowrank-signal";
    case Family::tucker_sparse: return "tucker-sparse";
    case Family::coherent: return "coherent";
    case Family::cp_sparse: return "cp-sparse";
  }
  return "?";
}

inline Family parse_family(const std::string& name) {
  for (Family f : {Family::tucker_dense, Family::tucker_lowrank_signal, Family::tucker_sparse, Family::coherent,
                   Family::cp_sparse}) {
    if (name == to_string(f)) return f;
  }
  throw std::invalid_argument("unknown tensor family '" + name + "'");
}

struct SynthSpec {
  Family family = Family::tucker_dense;
  std::size_t s = 50;
  std::size_t order = 3;
  std::size_t rtrue = 5;
  double p = 1.0;          // probability an entry of the core/factors is nonzero
  std::size_t n_sig = 5;   // low-rank signal terms
  double c_sig = 3.0;
  double eta = 0.5;
  std::size_t n_coh = 10;  // coherent spikes
  bool sparse_base = false;  // coherent family: sparse Tucker base instead of dense
  std::uint64_t seed = 0;

  void validate() const {
    if (s < 1 || order < 1 || rtrue < 1) throw std::invalid_argument("synth spec: extents and rank must be positive");
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("synth spec: p must lie in (0, 1]");
    if (n_coh > shape_product(shape())) throw std::invalid_argument("synth spec: more spikes than tensor entries");
  }

  Shape shape() const { return Shape(order, s); }
};

namespace detail {

inline double sparse_normal(CounterRng& rng, double p) {
  // Draw both numbers so the stream layout does not depend on p.
  const double keep = uniform01(rng);
  const double v = standard_normal(rng);
  return keep < p ? v : 0.0;
}

inline Matrix sparse_gaussian(Eigen::Index rows, Eigen::Index cols, double p, CounterRng rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = sparse_normal(rng, p);
  return m;
}

struct TuckerParts {
  DenseTensor core;
  std::vector<Matrix> factors;
};

inline TuckerParts tucker_parts(const SynthSpec& spec, double p, CounterRng rng) {
  TuckerParts parts;
  CounterRng core_rng = rng.split("core");
  parts.core = DenseTensor(Shape(spec.order, spec.rtrue));
  for (std::size_t i = 0; i < parts.core.size(); ++i) parts.core[i] = sparse_normal(core_rng, p);
  const CounterRng factor_rng = rng.split("factor");
  for (std::size_t n = 0; n < spec.order; ++n) {
    parts.factors.push_back(sparse_gaussian(static_cast<Eigen::Index>(spec.s), static_cast<Eigen::Index>(spec.rtrue), p,
                                            factor_rng.split(n)));
  }
  return parts;
}

// Emits the nonzeros of a multilinear product in lexicographic order. At
// depth k the prefix (i_1..i_k) has been absorbed into `state` and `step`
// maps the state and a factor row to the next state; the last mode's fiber is
// factor * state. Prefixes whose state vanishes are skipped, so work follows
// the nonzero structure and scratch memory is one fiber.
inline SparseTensor assemble_sparse(const Shape& shape, const std::vector<Matrix>& factors, const Vector& seed_state,
                                    const std::function<Vector(const Vector&, std::size_t, Eigen::Index)>& step) {
  SparseTensor out(shape);
  const std::size_t order = shape.size();
  std::vector<Index> idx(order, 0);
  Vector fiber;
  std::function<void(std::size_t, const Vector&)> walk = [&](std::size_t k, const Vector& state) {
    if (k + 1 == order) {
      fiber = factors[k] * state;
      for (std::size_t i = 0; i < shape[k]; ++i) {
        const double v = fiber[static_cast<Eigen::Index>(i)];
        if (v == 0.0) continue;
        idx[k] = static_cast<Index>(i);
        out.push_back_sorted(idx, v);
      }
      return;
    }
    for (std::size_t i = 0; i < shape[k]; ++i) {
      if (factors[k].row(static_cast<Eigen::Index>(i)).isZero(0.0)) continue;
      const Vector next = step(state, k, static_cast<Eigen::Index>(i));
      if (next.isZero(0.0)) continue;
      idx[k] = static_cast<Index>(i);
      walk(k + 1, next);
    }
  };
  walk(0, seed_state);
  return out;
}

inline SparseTensor assemble_tucker_sparse(const TuckerParts& parts) {
  Shape shape;
  for (const auto& f : parts.factors) shape.push_back(static_cast<std::size_t>(f.rows()));
  const auto r = static_cast<Eigen::Index>(parts.core.extent(0));
  const Vector core(Eigen::Map<const Vector>(parts.core.data().data(), static_cast<Eigen::Index>(parts.core.size())));
  // The state is the core contracted with the rows of the prefix modes,
  // stored flat with the first remaining mode slowest.
  return assemble_sparse(shape, parts.factors, core, [&](const Vector& state, std::size_t k, Eigen::Index i) {
    const Eigen::Index rest = state.size() / r;
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> view(state.data(), r, rest);
    return Vector(view.transpose() * parts.factors[k].row(i).transpose());
  });
}

inline SparseTensor assemble_cp_sparse(const std::vector<Matrix>& factors) {
  Shape shape;
  for (const auto& f : factors) shape.push_back(static_cast<std::size_t>(f.rows()));
  const Vector ones = Vector::Ones(factors[0].cols());
  return assemble_sparse(shape, factors, ones, [&](const Vector& state, std::size_t k, Eigen::Index i) {
    return Vector(state.array() * factors[k].row(i).transpose().array());
  });
}

}  // namespace detail

// T = C x_1 B1 ... x_N BN with i.i.d. standard normal core and factors.
inline DenseTensor gen_tucker_dense(const SynthSpec& spec) {
  spec.validate();
  const auto parts = detail::tucker_parts(spec, 1.0, CounterRng(spec.seed).split("tucker"));
  DenseTensor t = parts.core;
  for (std::size_t n = 0; n < spec.order; ++n) t = ttm(t, parts.factors[n], n);
  return t;
}

// Power-law weights lambda_i = C ||T|| / i^(1 + eta).
inline std::vector<double> signal_weights(double base_norm, std::size_t n, double c, double eta) {
  std::vector<double> out;
  for (std::size_t i = 1; i <= n; ++i) out.push_back(c * base_norm / std::pow(static_cast<double>(i), 1.0 + eta));
  return out;
}

// Tucker tensor plus sum_i lambda_i a_i^(1) o ... o a_i^(N) with unit vectors.
inline DenseTensor gen_lowrank_signal(const SynthSpec& spec) {
  spec.validate();
  DenseTensor t = gen_tucker_dense(spec);
  const auto lambda = signal_weights(t.norm(), spec.n_sig, spec.c_sig, spec.eta);
  const CounterRng rng = CounterRng(spec.seed).split("signal");
  std::vector<Matrix> vecs;
  for (std::size_t n = 0; n < spec.order; ++n) {
    CounterRng sub = rng.split(n);
    Matrix a = gaussian_matrix(static_cast<Eigen::Index>(spec.s), static_cast<Eigen::Index>(spec.n_sig), sub);
    for (Eigen::Index j = 0; j < a.cols(); ++j) a.col(j).normalize();
    vecs.push_back(std::move(a));
  }
  if (spec.n_sig == 0) return t;
  CPModel signal;
  signal.factors = std::move(vecs);
  signal.weights = Eigen::Map<const Vector>(lambda.data(), static_cast<Eigen::Index>(lambda.size()));
  const DenseTensor add = signal.reconstruct();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] += add[i];
  return t;
}

// Tucker tensor whose core and factor entries are nonzero with probability p,
// assembled without densifying.
inline SparseTensor gen_tucker_sparse(const SynthSpec& spec) {
  spec.validate();
  const CounterRng rng = CounterRng(spec.seed).split("tucker-sparse");
  SparseTensor t = detail::assemble_tucker_sparse(detail::tucker_parts(spec, spec.p, rng));
  if (t.nnz() == 0) t = detail::assemble_tucker_sparse(detail::tucker_parts(spec, spec.p, rng.split("retry")));
  return t;
}

inline SparseTensor gen_cp_sparse(const SynthSpec& spec) {
  spec.validate();
  const CounterRng rng = CounterRng(spec.seed).split("cp-sparse");
  auto draw = [&](const CounterRng& r) {
    std::vector<Matrix> f;
    for (std::size_t n = 0; n < spec.order; ++n) {
      f.push_back(detail::sparse_gaussian(static_cast<Eigen::Index>(spec.s), static_cast<Eigen::Index>(spec.rtrue), spec.p, r.split(n)));
    }
    return detail::assemble_cp_sparse(f);
  };
  SparseTensor t = draw(rng);
  if (t.nnz() == 0) t = draw(rng.split("retry"));
  return t;
}

// Spikes of the coherent family: linear positions and values.
struct SpikeSet {
  std::vector<std::size_t> positions;
  std::vector<double> values;

  double norm() const {
    double acc = 0.0;
    for (double v : values) acc += v * v;
    return std::sqrt(acc);
  }
};

namespace detail {

// n distinct uniform positions, each N(||T|| / sqrt(n), 1). `occupied` marks
// positions to avoid.
inline SpikeSet draw_spikes(std::size_t total, std::size_t n, double base_norm, CounterRng rng,
                            const std::function<bool(std::size_t)>& occupied) {
  SpikeSet out;
  std::set<std::size_t> used;
  const double mean = n > 0 ? base_norm / std::sqrt(static_cast<double>(n)) : 0.0;
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  while (out.positions.size() < n) {
    const std::size_t pos = pick(rng);
    if (used.count(pos) != 0 || occupied(pos)) continue;
    used.insert(pos);
    out.positions.push_back(pos);
    out.values.push_back(mean + standard_normal(rng));
  }
  return out;
}

}  // namespace detail

// Dense base: spikes are added on top of the existing entries at distinct
// positions.
inline std::pair<DenseTensor, SpikeSet> gen_coherent_dense(const SynthSpec& spec) {
  spec.validate();
  SynthSpec base_spec = spec;
  base_spec.family = Family::tucker_dense;
  DenseTensor t = gen_tucker_dense(base_spec);
  const SpikeSet spikes = detail::draw_spikes(t.size(), spec.n_coh, t.norm(), CounterRng(spec.seed).split("spikes"),
                                              [](std::size_t) { return false; });
  for (std::size_t k = 0; k < spikes.positions.size(); ++k) t[spikes.positions[k]] += spikes.values[k];
  return {std::move(t), spikes};
}

// Sparse base: spike positions avoid existing nonzeros.
inline std::pair<SparseTensor, SpikeSet> gen_coherent_sparse(const SynthSpec& spec) {
  spec.validate();
  SynthSpec base_spec = spec;
  base_spec.family = Family::tucker_sparse;
  const SparseTensor base = gen_tucker_sparse(base_spec);
  const Shape shape = base.shape();
  std::vector<std::size_t> linear(base.nnz());
  for (std::size_t k = 0; k < base.nnz(); ++k) {
    std::size_t lin = 0;
    for (std::size_t m = 0; m < shape.size(); ++m) lin = lin * shape[m] + base.index(k, m);
    linear[k] = lin;
  }
  // Entries are sorted lexicographically, hence by linear index.
  auto occupied = [&](std::size_t pos) { return std::binary_search(linear.begin(), linear.end(), pos); };
  if (base.nnz() + spec.n_coh > shape_product(shape)) throw std::invalid_argument("gen_coherent: not enough free positions");
  const SpikeSet spikes = detail::draw_spikes(shape_product(shape), spec.n_coh, base.norm(),
                                              CounterRng(spec.seed).split("spikes"), occupied);

  std::vector<std::pair<std::size_t, double>> extra;
  for (std::size_t k = 0; k < spikes.positions.size(); ++k) extra.emplace_back(spikes.positions[k], spikes.values[k]);
  std::sort(extra.begin(), extra.end());
  SparseTensor out(shape);
  std::vector<Index> idx(shape.size());
  auto emit_linear = [&](std::size_t lin, double v) {
    for (std::size_t m = shape.size(); m-- > 0;) {
      idx[m] = static_cast<Index>(lin % shape[m]);
      lin /= shape[m];
    }
    out.push_back_sorted(idx, v);
  };
  std::size_t e = 0;
  for (std::size_t k = 0; k < base.nnz(); ++k) {
    while (e < extra.size() && extra[e].first < linear[k]) {
      emit_linear(extra[e].first, extra[e].second);
      ++e;
    }
    out.push_back_sorted(base.coord(k), base.value(k));
  }
  for (; e < extra.size(); ++e) emit_linear(extra[e].first, extra[e].second);
  return {std::move(out), spikes};
}

inline AnyTensor generate(const SynthSpec& spec) {
  switch (spec.family) {
    case Family::tucker_dense: return gen_tucker_dense(spec);
    case Family::tucker_lowrank_signal: return gen_lowrank_signal(spec);
    case Family::tucker_sparse: return gen_tucker_sparse(spec);
    case Family::coherent:
      if (spec.sparse_base) return gen_coherent_sparse(spec).first;
      return gen_coherent_dense(spec).first;
    case Family::cp_sparse: return gen_cp_sparse(spec);
  }
  throw std::invalid_argument("generate: unknown family");
}

}  // namespace rtucker
