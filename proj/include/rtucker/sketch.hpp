#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include "rtucker/fft.hpp"
#include "rtucker/linalg.hpp"
#include "rtucker/unfolding.hpp"

namespace rtucker {

// k-wise independent hash family: a random polynomial of degree k-1 over the
// prime field GF(2^31 - 1).
class KWiseHash {
 public:
  static constexpr std::uint64_t kPrime = (1ULL << 31) - 1;

  KWiseHash() = default;

  KWiseHash(std::size_t independence, CounterRng& rng) : coeffs_(independence) {
    if (independence < 1) throw std::invalid_argument("KWiseHash: independence must be >= 1");
    for (auto& c : coeffs_) c = rng() % kPrime;
  }

  std::uint64_t raw(std::uint64_t key) const {
    if (key >= kPrime) throw std::out_of_range("KWiseHash: key exceeds field size");
    std::uint64_t acc = 0;
    for (std::size_t i = coeffs_.size(); i-- > 0;) acc = mod(acc * key + coeffs_[i]);
    return acc;
  }

  std::size_t bucket(std::uint64_t key, std::size_t m) const { return static_cast<std::size_t>(raw(key) % m); }
  double sign(std::uint64_t key) const { return (raw(key) & 1ULL) ? -1.0 : 1.0; }

  std::size_t independence() const { return coeffs_.size(); }

 private:
  static std::uint64_t mod(std::uint64_t x) {
    // Operands stay below 2^62, so two Mersenne folds suffice.
    x = (x & kPrime) + (x >> 31);
    x = (x & kPrime) + (x >> 31);
    return x >= kPrime ? x - kPrime : x;
  }

  std::vector<std::uint64_t> coeffs_;
};

// CountSketch S = Omega D mapping R^n -> R^m, stored as explicit tables.
class CountSketchOp {
 public:
  CountSketchOp() = default;

  // Bucket hash drawn 3-wise independent, signs 4-wise independent.
  CountSketchOp(std::size_t n, std::size_t m, CounterRng& rng) : m_(m), hash_(n), sign_(n) {
    if (m == 0) throw std::invalid_argument("CountSketchOp: sketch size must be positive");
    const KWiseHash h(3, rng);
    const KWiseHash s(4, rng);
    for (std::size_t i = 0; i < n; ++i) {
      hash_[i] = h.bucket(i, m);
      sign_[i] = s.sign(i);
    }
  }

  CountSketchOp(std::size_t m, std::vector<std::size_t> hash, std::vector<double> sign)
      : m_(m), hash_(std::move(hash)), sign_(std::move(sign)) {
    if (hash_.size() != sign_.size()) throw dimension_error("CountSketchOp: hash and sign tables differ in length");
    for (auto h : hash_) {
      if (h >= m_) throw dimension_error("CountSketchOp: bucket out of range");
    }
    for (double s : sign_) {
      if (s != 1.0 && s != -1.0) throw std::invalid_argument("CountSketchOp: signs must be +-1");
    }
  }

  std::size_t sketch_size() const { return m_; }
  std::size_t input_size() const { return hash_.size(); }
  std::size_t bucket(std::size_t i) const { return hash_[i]; }
  double sign(std::size_t i) const { return sign_[i]; }

  // S * X for X with input_size() rows.
  Matrix apply(const Matrix& x) const {
    if (static_cast<std::size_t>(x.rows()) != input_size()) throw dimension_error("CountSketchOp::apply: row mismatch");
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(m_), x.cols());
    for (std::size_t i = 0; i < hash_.size(); ++i) {
      out.row(static_cast<Eigen::Index>(hash_[i])) += sign_[i] * x.row(static_cast<Eigen::Index>(i));
    }
    return out;
  }

  Matrix materialize() const {
    Matrix s = Matrix::Zero(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(input_size()));
    for (std::size_t i = 0; i < hash_.size(); ++i) s(static_cast<Eigen::Index>(hash_[i]), static_cast<Eigen::Index>(i)) = sign_[i];
    return s;
  }

 private:
  std::size_t m_ = 0;
  std::vector<std::size_t> hash_;
  std::vector<double> sign_;
};

enum class ConvolutionPath { automatic, direct, fft };

// Below this sketch size the circular convolutions of TensorSketch are done
// directly.
constexpr std::size_t kDirectConvolutionLimit = 64;

// Order-K TensorSketch over rows indexed by multi-indices (i_1..i_K), first
// index slowest. Composed hash H = (sum_k H_k(i_k)) mod m, composed sign
// S = prod_k S_k(i_k).
class TensorSketchOp {
 public:
  TensorSketchOp() = default;

  TensorSketchOp(Shape extents, std::size_t m, CounterRng& rng) : m_(m), extents_(std::move(extents)) {
    if (extents_.empty()) throw dimension_error("TensorSketchOp: need at least one mode");
    for (std::size_t k = 0; k < extents_.size(); ++k) modes_.emplace_back(extents_[k], m, rng);
  }

  std::size_t sketch_size() const { return m_; }
  const Shape& extents() const { return extents_; }
  std::size_t order() const { return extents_.size(); }
  const CountSketchOp& mode_sketch(std::size_t k) const { return modes_[k]; }
  std::size_t input_size() const { return shape_product(extents_); }

  std::size_t hash(std::span<const std::size_t> idx) const {
    std::size_t h = 0;
    for (std::size_t k = 0; k < extents_.size(); ++k) h += modes_[k].bucket(idx[k]);
    return h % m_;
  }
  double sign(std::span<const std::size_t> idx) const {
    double s = 1.0;
    for (std::size_t k = 0; k < extents_.size(); ++k) s *= modes_[k].sign(idx[k]);
    return s;
  }

  // Composed hash and sign of a linear row index.
  std::pair<std::size_t, double> row_map(std::size_t row) const {
    std::size_t h = 0;
    double s = 1.0;
    for (std::size_t k = extents_.size(); k-- > 0;) {
      const std::size_t i = row % extents_[k];
      row /= extents_[k];
      h += modes_[k].bucket(i);
      s *= modes_[k].sign(i);
    }
    return {h % m_, s};
  }

  Matrix materialize() const {
    Matrix s = Matrix::Zero(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(input_size()));
    for (std::size_t row = 0; row < input_size(); ++row) {
      auto [h, sg] = row_map(row);
      s(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(row)) = sg;
    }
    return s;
  }

  // S (A_1 (x) ... (x) A_K) without forming the Kronecker product: per-mode
  // CountSketch, then circular convolution of the sketched columns (through
  // the FFT for large m).
  Matrix apply_kron(std::span<const Matrix> factors, ConvolutionPath path = ConvolutionPath::automatic) const {
    if (factors.size() != extents_.size()) throw dimension_error("ts_apply_kron: factor count differs from sketch order");
    std::vector<Matrix> sketched;
    std::vector<std::size_t> widths;
    std::size_t total = 1;
    for (std::size_t k = 0; k < factors.size(); ++k) {
      if (static_cast<std::size_t>(factors[k].rows()) != extents_[k]) {
        throw dimension_error("ts_apply_kron: factor " + std::to_string(k) + " has " + std::to_string(factors[k].rows()) +
                              " rows, sketch extent is " + std::to_string(extents_[k]));
      }
      sketched.push_back(modes_[k].apply(factors[k]));
      widths.push_back(static_cast<std::size_t>(factors[k].cols()));
      total *= widths.back();
    }
    const auto m = static_cast<Eigen::Index>(m_);
    Matrix out(m, static_cast<Eigen::Index>(total));
    if (sketched.size() == 1) return sketched[0];

    const bool use_fft = path == ConvolutionPath::fft || (path == ConvolutionPath::automatic && m_ >= kDirectConvolutionLimit);
    std::vector<std::size_t> combo(sketched.size(), 0);
    if (use_fft) {
      // Spectra of every sketched column, per mode.
      std::vector<std::vector<std::vector<fft::Complex>>> spectra(sketched.size());
      for (std::size_t k = 0; k < sketched.size(); ++k) {
        for (std::size_t r = 0; r < widths[k]; ++r) {
          std::vector<fft::Complex> col(m_);
          for (std::size_t i = 0; i < m_; ++i) col[i] = sketched[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r));
          fft::forward(col);
          spectra[k].push_back(std::move(col));
        }
      }
      std::vector<fft::Complex> acc(m_);
      for (std::size_t c = 0; c < total; ++c) {
        std::fill(acc.begin(), acc.end(), fft::Complex(1.0, 0.0));
        for (std::size_t k = 0; k < sketched.size(); ++k) {
          const auto& sp = spectra[k][combo[k]];
          for (std::size_t i = 0; i < m_; ++i) acc[i] *= sp[i];
        }
        fft::inverse(acc);
        for (std::size_t i = 0; i < m_; ++i) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = acc[i].real();
        advance(combo, widths);
      }
      return out;
    }
    std::vector<double> acc, col;
    for (std::size_t c = 0; c < total; ++c) {
      acc.assign(m_, 0.0);
      acc[0] = 1.0;  // delta: identity for circular convolution
      for (std::size_t k = 0; k < sketched.size(); ++k) {
        col.resize(m_);
        for (std::size_t i = 0; i < m_; ++i) col[i] = sketched[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(combo[k]));
        acc = fft::circular_convolve_direct(acc, col);
      }
      for (std::size_t i = 0; i < m_; ++i) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = acc[i];
      advance(combo, widths);
    }
    return out;
  }

  // S * B for dense B with input_size() rows.
  Matrix apply_rhs(const Matrix& b) const {
    if (static_cast<std::size_t>(b.rows()) != input_size()) throw dimension_error("ts_apply_rhs: row count differs from sketch input size");
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(m_), b.cols());
    for (std::size_t row = 0; row < input_size(); ++row) {
      auto [h, s] = row_map(row);
      out.row(static_cast<Eigen::Index>(h)) += s * b.row(static_cast<Eigen::Index>(row));
    }
    return out;
  }

  // S * B for sparse B, one pass over the nonzeros.
  Matrix apply_rhs(const CooMatrix& b) const {
    if (b.rows != input_size()) throw dimension_error("ts_apply_rhs: row count differs from sketch input size");
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(b.cols));
    for (std::size_t k = 0; k < b.nnz(); ++k) {
      auto [h, s] = row_map(b.row[k]);
      out(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(b.col[k])) += s * b.val[k];
    }
    return out;
  }

  // S * T_(n)^T, one pass over the stored entries.
  Matrix apply_rhs(const ModeUnfolding& b) const {
    if (b.rows() != input_size()) throw dimension_error("ts_apply_rhs: row count differs from sketch input size");
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(b.cols()));
    // Row hashes repeat across a dense fiber sweep; cache them.
    std::vector<std::size_t> hash(b.rows());
    std::vector<double> sgn(b.rows());
    for (std::size_t row = 0; row < b.rows(); ++row) std::tie(hash[row], sgn[row]) = row_map(row);
    b.for_each_nonzero([&](std::size_t row, std::size_t col, double v) {
      out(static_cast<Eigen::Index>(hash[row]), static_cast<Eigen::Index>(col)) += sgn[row] * v;
    });
    return out;
  }

 private:
  static void advance(std::vector<std::size_t>& combo, const std::vector<std::size_t>& widths) {
    for (std::size_t k = combo.size(); k-- > 0;) {
      if (++combo[k] < widths[k]) return;
      combo[k] = 0;
    }
  }

  std::size_t m_ = 0;
  Shape extents_;
  std::vector<CountSketchOp> modes_;
};

enum class SamplingVariant { random, deterministic };

// How sampled factor rows combine into a row of the left-hand side.
enum class RowProduct { kronecker, khatri_rao };

// Leverage-score row sampler for a Kronecker (or Khatri-Rao) chain of factors.
struct LevSamplerOp {
  std::size_t m = 0;
  SamplingVariant variant = SamplingVariant::random;
  std::vector<LeverageProfile> profiles;
  Shape extents;
  std::vector<std::size_t> samples;  // m x K multi-indices, row-major
  std::vector<double> weights;       // m rescale weights

  std::size_t order() const { return extents.size(); }
  std::span<const std::size_t> sample(std::size_t j) const { return std::span(samples).subspan(j * order(), order()); }

  // Linear row of the chain (first mode slowest) for sample j.
  std::size_t sample_row(std::size_t j) const {
    std::size_t row = 0;
    for (std::size_t k = 0; k < order(); ++k) row = row * extents[k] + samples[j * order() + k];
    return row;
  }
};

namespace detail {

// Top-m products of per-mode scores via best-first search over score-sorted
// lists. Ties in the product are broken by lexicographic multi-index order.
inline std::vector<std::size_t> top_score_products(const std::vector<LeverageProfile>& profiles, std::size_t m) {
  const std::size_t order = profiles.size();
  std::vector<std::vector<std::size_t>> sorted(order);
  for (std::size_t k = 0; k < order; ++k) {
    const auto& sc = profiles[k].scores;
    sorted[k].resize(sc.size());
    std::iota(sorted[k].begin(), sorted[k].end(), std::size_t{0});
    std::stable_sort(sorted[k].begin(), sorted[k].end(), [&](std::size_t a, std::size_t b) { return sc[a] > sc[b]; });
  }
  struct Node {
    double product;
    std::vector<std::size_t> index;  // original indices
    std::vector<std::size_t> pos;    // positions in the sorted lists
  };
  auto make = [&](std::vector<std::size_t> pos) {
    Node node{1.0, std::vector<std::size_t>(order), std::move(pos)};
    for (std::size_t k = 0; k < order; ++k) {
      node.index[k] = sorted[k][node.pos[k]];
      node.product *= profiles[k].scores[node.index[k]];
    }
    return node;
  };
  // Max-heap on product, then min on multi-index.
  auto worse = [](const Node& a, const Node& b) {
    if (a.product != b.product) return a.product < b.product;
    return a.index > b.index;
  };
  std::priority_queue<Node, std::vector<Node>, decltype(worse)> heap(worse);
  std::set<std::vector<std::size_t>> seen;
  std::vector<std::size_t> start(order, 0);
  seen.insert(start);
  heap.push(make(start));
  std::vector<std::size_t> out;
  out.reserve(m * order);
  while (out.size() < m * order && !heap.empty()) {
    Node top = heap.top();
    heap.pop();
    out.insert(out.end(), top.index.begin(), top.index.end());
    for (std::size_t k = 0; k < order; ++k) {
      if (top.pos[k] + 1 >= sorted[k].size()) continue;
      auto next = top.pos;
      ++next[k];
      if (seen.insert(next).second) heap.push(make(next));
    }
  }
  return out;
}

}  // namespace detail

inline LevSamplerOp lev_build(std::span<const Matrix> factors, std::size_t m, SamplingVariant variant, CounterRng& rng) {
  if (m < 1) throw std::invalid_argument("lev_build: sample count must be at least 1");
  if (factors.empty()) throw dimension_error("lev_build: no factors");
  LevSamplerOp op;
  op.m = m;
  op.variant = variant;
  for (const auto& a : factors) {
    op.profiles.push_back(leverage_scores(a));
    op.extents.push_back(static_cast<std::size_t>(a.rows()));
  }
  const std::size_t order = factors.size();
  if (variant == SamplingVariant::deterministic) {
    const std::size_t total = shape_product(op.extents);
    if (m > total) throw std::invalid_argument("lev_build: deterministic sample count exceeds the number of rows");
    op.samples = detail::top_score_products(op.profiles, m);
    op.weights.assign(m, 1.0);
    return op;
  }
  std::vector<std::vector<double>> probs;
  std::vector<std::discrete_distribution<std::size_t>> dists;
  for (const auto& p : op.profiles) {
    probs.push_back(p.probabilities());
    dists.emplace_back(probs.back().begin(), probs.back().end());
  }
  op.samples.resize(m * order);
  op.weights.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    double p = 1.0;
    for (std::size_t k = 0; k < order; ++k) {
      const std::size_t i = dists[k](rng);
      op.samples[j * order + k] = i;
      p *= probs[k][i];
    }
    op.weights[j] = 1.0 / std::sqrt(static_cast<double>(m) * p);
  }
  return op;
}

struct SketchedSystem {
  Matrix z;  // sketched left-hand side
  Matrix y;  // sketched right-hand side
};

// Rows of the sampled left-hand side: weighted Kronecker (or Khatri-Rao)
// products of the sampled factor rows.
inline Matrix lev_apply_lhs(const LevSamplerOp& op, std::span<const Matrix> factors,
                            RowProduct product = RowProduct::kronecker) {
  if (factors.size() != op.order()) throw dimension_error("lev_apply: factor count differs from sampler order");
  std::vector<std::size_t> widths;
  std::size_t total = 1;
  for (std::size_t k = 0; k < factors.size(); ++k) {
    if (static_cast<std::size_t>(factors[k].rows()) != op.extents[k]) throw dimension_error("lev_apply: factor extent mismatch");
    widths.push_back(static_cast<std::size_t>(factors[k].cols()));
    total = product == RowProduct::kronecker ? total * widths.back() : widths.back();
  }
  if (product == RowProduct::khatri_rao) {
    for (auto w : widths) {
      if (w != widths[0]) throw dimension_error("lev_apply: Khatri-Rao factors need equal column counts");
    }
  }
  Matrix z(static_cast<Eigen::Index>(op.m), static_cast<Eigen::Index>(total));
  std::vector<const double*> rows(factors.size());
  for (std::size_t j = 0; j < op.m; ++j) {
    for (std::size_t k = 0; k < factors.size(); ++k) {
      rows[k] = factors[k].data() + op.samples[j * op.order() + k] * widths[k];
    }
    double* dst = z.data() + j * total;
    if (product == RowProduct::kronecker) {
      kron_rows_into(rows, widths, op.weights[j], dst);
    } else {
      for (std::size_t r = 0; r < total; ++r) {
        double v = op.weights[j];
        for (std::size_t k = 0; k < factors.size(); ++k) v *= rows[k][r];
        dst[r] = v;
      }
    }
  }
  return z;
}

inline SketchedSystem lev_apply(const LevSamplerOp& op, std::span<const Matrix> factors, const ModeUnfolding& rhs,
                                RowProduct product = RowProduct::kronecker) {
  if (rhs.rows() != shape_product(op.extents)) throw dimension_error("lev_apply: right-hand side row count mismatch");
  SketchedSystem out;
  out.z = lev_apply_lhs(op, factors, product);
  out.y = Matrix::Zero(static_cast<Eigen::Index>(op.m), static_cast<Eigen::Index>(rhs.cols()));
  for (std::size_t j = 0; j < op.m; ++j) {
    rhs.add_row(op.sample_row(j), op.weights[j], out.y.data() + j * rhs.cols());
  }
  return out;
}

inline SketchedSystem lev_apply(const LevSamplerOp& op, std::span<const Matrix> factors, const Matrix& rhs,
                                RowProduct product = RowProduct::kronecker) {
  if (static_cast<std::size_t>(rhs.rows()) != shape_product(op.extents)) {
    throw dimension_error("lev_apply: right-hand side row count mismatch");
  }
  SketchedSystem out;
  out.z = lev_apply_lhs(op, factors, product);
  out.y.resize(static_cast<Eigen::Index>(op.m), rhs.cols());
  for (std::size_t j = 0; j < op.m; ++j) {
    out.y.row(static_cast<Eigen::Index>(j)) = op.weights[j] * rhs.row(static_cast<Eigen::Index>(op.sample_row(j)));
  }
  return out;
}

// Composite sketch S = T G applied from the right: T is an (n x k2)
// CountSketch (transposed convention), G is k2 x k1 Gaussian with variance
// 1/k1.
class CompositeSketchOp {
 public:
  CompositeSketchOp(std::size_t n, std::size_t k1, std::size_t k2, CounterRng& rng) {
    if (k1 == 0) throw std::invalid_argument("CompositeSketchOp: target width must be positive");
    if (k2 < k1) throw std::invalid_argument("CompositeSketchOp: intermediate width must be >= target width");
    count_ = CountSketchOp(n, k2, rng);
    gauss_ = gaussian_matrix(static_cast<Eigen::Index>(k2), static_cast<Eigen::Index>(k1), rng,
                             1.0 / std::sqrt(static_cast<double>(k1)));
  }

  CompositeSketchOp(CountSketchOp count, Matrix gauss) : count_(std::move(count)), gauss_(std::move(gauss)) {
    if (static_cast<std::size_t>(gauss_.rows()) != count_.sketch_size()) {
      throw dimension_error("CompositeSketchOp: Gaussian stage rows differ from CountSketch width");
    }
    if (gauss_.cols() > gauss_.rows()) throw std::invalid_argument("CompositeSketchOp: need k2 >= k1");
  }

  std::size_t target_width() const { return static_cast<std::size_t>(gauss_.cols()); }
  std::size_t intermediate_width() const { return count_.sketch_size(); }
  std::size_t input_size() const { return count_.input_size(); }
  const CountSketchOp& count_stage() const { return count_; }
  const Matrix& gaussian_stage() const { return gauss_; }

  Matrix materialize() const { return count_.materialize().transpose() * gauss_; }

  // M * T * G for dense M (rows x input_size()).
  Matrix apply(const Matrix& mat) const {
    if (static_cast<std::size_t>(mat.cols()) != input_size()) throw dimension_error("composite_apply: column count mismatch");
    Matrix mid = Matrix::Zero(mat.rows(), static_cast<Eigen::Index>(intermediate_width()));
    for (std::size_t j = 0; j < input_size(); ++j) {
      mid.col(static_cast<Eigen::Index>(count_.bucket(j))) += count_.sign(j) * mat.col(static_cast<Eigen::Index>(j));
    }
    return mid * gauss_;
  }

  // T_(n) * T * G, touching every stored entry once.
  Matrix apply(const ModeUnfolding& unf) const {
    if (unf.rows() != input_size()) throw dimension_error("composite_apply: column count mismatch");
    Matrix mid = Matrix::Zero(static_cast<Eigen::Index>(unf.cols()), static_cast<Eigen::Index>(intermediate_width()));
    unf.for_each_nonzero([&](std::size_t row, std::size_t col, double v) {
      mid(static_cast<Eigen::Index>(col), static_cast<Eigen::Index>(count_.bucket(row))) += count_.sign(row) * v;
    });
    return mid * gauss_;
  }

 private:
  CountSketchOp count_;
  Matrix gauss_;
};

}  // namespace rtucker
