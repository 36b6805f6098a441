#include "support.hpp"

using namespace rtucker;
using rtucker::test::orthonormality_error;
using rtucker::test::random_dense;

namespace {

DenseTensor tensor1(std::size_t s, std::size_t rtrue, std::uint64_t seed) {
  SynthSpec spec;
  spec.s = s;
  spec.rtrue = rtrue;
  spec.seed = seed;
  return gen_tucker_dense(spec);
}

TuckerConfig config(std::size_t rank, SketchKind sketch = SketchKind::none, std::uint64_t seed = 1) {
  TuckerConfig c;
  c.ranks = {rank, rank, rank};
  c.sketch = sketch;
  c.init = sketch == SketchKind::none ? InitKind::hosvd : InitKind::rrf;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(TuckerConfig, ValidatesRanksAndSketchSize) {
  const Shape shape{6, 6, 6};
  TuckerConfig c = config(2);
  EXPECT_NO_THROW(c.validate(shape));
  c.ranks = {2, 7, 2};
  EXPECT_THROW(c.validate(shape), dimension_error);
  c.ranks = {2, 2};
  EXPECT_THROW(c.validate(shape), dimension_error);
  c = config(2, SketchKind::tensorsketch);
  c.sketch_size = 3;
  EXPECT_THROW(c.validate(shape), std::invalid_argument);
  c.sketch_size = 0;
  EXPECT_EQ(c.resolved_sketch_size(), 64u);
  EXPECT_EQ(c.resolved_rrf_width(5), 20u);
}

TEST(HosvdInit, ExactTuckerThenOneHooiSweep) {
  const DenseTensor t = tensor1(20, 4, 3);
  TuckerConfig c = config(4);
  c.max_sweeps = 1;
  const auto [model, trace] = hooi(t, c);
  ASSERT_EQ(trace.fitness.size(), 1u);
  EXPECT_GE(trace.fitness[0], 0.999);
}

TEST(HosvdInit, SuperdiagonalGivesCoordinateColumns) {
  DenseTensor t(Shape{4, 4, 4});
  for (std::size_t i = 0; i < 4; ++i) t.at({i, i, i}) = 1.0;
  CounterRng rng(1);
  const auto factors = hosvd_init(t, Shape{4, 4, 4}, rng);
  for (const auto& a : factors) {
    EXPECT_LE(orthonormality_error(a), 1e-12);
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      EXPECT_NEAR(a.col(j).cwiseAbs().maxCoeff(), 1.0, 1e-12);
      EXPECT_NEAR(a.col(j).cwiseAbs().sum(), 1.0, 1e-12);
    }
  }
  // Distinct diagonal values fix the order too.
  for (std::size_t i = 0; i < 4; ++i) t.at({i, i, i}) = static_cast<double>(i + 1);
  const auto ordered = hosvd_init(t, Shape{2, 2, 2}, rng);
  for (const auto& a : ordered) {
    EXPECT_NEAR(std::abs(a(3, 0)), 1.0, 1e-12);
    EXPECT_NEAR(std::abs(a(2, 1)), 1.0, 1e-12);
  }
}

TEST(HosvdInit, RandomTensorFactorsOrthonormal) {
  const DenseTensor t = random_dense({7, 5, 6}, 4);
  CounterRng rng(2);
  for (const auto& a : hosvd_init(t, Shape{3, 2, 6}, rng)) EXPECT_LE(orthonormality_error(a), 1e-10);
}

TEST(HosvdInit, RandomizedPathAgreesOnLowRankTensor) {
  // Large enough for the range-finder path yet exactly low rank.
  const DenseTensor t = tensor1(160, 3, 5);
  const ModeUnfolding unf(t, 0);
  ASSERT_GT(unf.gram_cost(), 5e8);
  CounterRng rng(3);
  const Matrix a = leading_unfolding_vectors(unf, 3, rng);
  const Matrix tn = matricize(t, 0);
  EXPECT_LE((tn - a * (a.transpose() * tn)).norm(), 1e-8 * tn.norm());
}

TEST(InitRrf, ContainsColumnSpaceOfExactRankMatrix) {
  CounterRng rng(6);
  const Matrix b = gaussian_matrix(30, 3, rng) * gaussian_matrix(3, 200, rng);
  const Matrix q = rrf_basis(b, 3 + 8, rng, 3);
  EXPECT_LE((b - q * (q.transpose() * b)).norm(), 1e-6 * b.norm());
  const Matrix a = init_rrf(b, 3, 11, rng);
  EXPECT_EQ(a.cols(), 3);
  EXPECT_LE((b - a * (a.transpose() * b)).norm(), 1e-6 * b.norm());
}

TEST(InitRrf, IdentityGivesOrthonormalColumns) {
  CounterRng rng(7);
  const Matrix a = init_rrf(Matrix(Matrix::Identity(12, 12)), 4, 8, rng);
  EXPECT_EQ(a.rows(), 12);
  EXPECT_EQ(a.cols(), 4);
  EXPECT_LE(orthonormality_error(a), 1e-10);
}

TEST(InitRrf, LowRankSketchIsCompleted) {
  CounterRng rng(8);
  Matrix b = Matrix::Zero(10, 40);
  b.col(3).setOnes();
  const Matrix a = init_rrf(b, 4, 6, rng);
  EXPECT_EQ(a.cols(), 4);
  EXPECT_LE(orthonormality_error(a), 1e-10);
  EXPECT_THROW(init_rrf(b, 4, 3, rng), std::invalid_argument);
}

TEST(InitRrf, UnfoldingAndMatrixPathsAgree) {
  const DenseTensor t = random_dense({6, 5, 4}, 9);
  CounterRng a(10), b(10);
  const Matrix x = rrf_basis(ModeUnfolding(t, 1), 4, a, 2);
  const Matrix y = rrf_basis(matricize(t, 1), 4, b, 2);
  EXPECT_LE((x * x.transpose() - y * y.transpose()).norm(), 1e-10);
}

TEST(Hooi, ExactTensorWithinTwoSweeps) {
  const DenseTensor t = tensor1(30, 5, 11);
  TuckerConfig c = config(5);
  c.max_sweeps = 2;
  const auto [model, trace] = hooi(t, c);
  EXPECT_GE(trace.fitness.back(), 0.999);
  EXPECT_NEAR(fitness(t, model), trace.fitness.back(), 1e-8);
}

TEST(Hooi, FullRanksFitExactly) {
  const DenseTensor t = random_dense({4, 3, 5}, 12);
  TuckerConfig c;
  c.ranks = {4, 3, 5};
  c.max_sweeps = 1;
  const auto [model, trace] = hooi(t, c);
  EXPECT_NEAR(trace.fitness[0], 1.0, 1e-7);
}

TEST(Hooi, ResidualNonIncreasingAndFactorsOrthonormal) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const DenseTensor t = random_dense({8, 9, 7}, 40 + seed);
    TuckerConfig c = config(3);
    c.init = InitKind::random;
    c.seed = seed;
    const auto [model, trace] = hooi(t, c);
    for (std::size_t k = 1; k < trace.residuals.size(); ++k) {
      EXPECT_LE(trace.residuals[k], trace.residuals[k - 1] * (1.0 + 1e-10));
    }
    for (const auto& a : model.factors) EXPECT_LE(orthonormality_error(a), 1e-8);
  }
}

TEST(Hooi, SparseAndDenseAgree) {
  const SparseTensor s = rtucker::test::random_sparse({8, 7, 6}, 0.3, 13);
  TuckerConfig c = config(2);
  const auto [ms, ts] = hooi(s, c);
  const auto [md, td] = hooi(s.to_dense(), c);
  for (std::size_t k = 0; k < ts.fitness.size(); ++k) EXPECT_NEAR(ts.fitness[k], td.fitness[k], 1e-8);
}

TEST(Hooi, ZeroTensorThrows) {
  EXPECT_THROW(hooi(DenseTensor(Shape{3, 3, 3}), config(1)), std::domain_error);
}

TEST(SketchedTucker, ExactTensorAllSketches) {
  const DenseTensor t = tensor1(40, 5, 14);
  for (auto sk : {SketchKind::tensorsketch, SketchKind::leverage_random, SketchKind::leverage_deterministic}) {
    const auto [model, trace] = sketched_tucker_als(t, config(5, sk, 2));
    EXPECT_GE(trace.fitness.back(), 0.99) << to_string(sk);
    EXPECT_EQ(trace.sketch_size, 400u);
    for (const auto& a : model.factors) EXPECT_LE(orthonormality_error(a), 1e-8);
  }
}

TEST(SketchedTucker, FullDeterministicSubproblemMatchesExactSolve) {
  CounterRng rng(15);
  const DenseTensor t = random_dense({6, 5, 4}, rng);
  std::vector<Matrix> f{random_orthonormal(6, 2, rng), random_orthonormal(5, 2, rng), random_orthonormal(4, 2, rng)};
  for (std::size_t n = 0; n < 3; ++n) {
    std::vector<Matrix> rest;
    for (std::size_t k = 0; k < 3; ++k) {
      if (k != n) rest.push_back(f[k]);
    }
    const std::size_t rows = shape_product(t.shape()) / t.extent(n);
    const LevSamplerOp op = lev_build(rest, rows, SamplingVariant::deterministic, rng);
    const SketchedSystem sys = lev_apply(op, rest, ModeUnfolding(t, n));
    const LowRankSolution sol = rsvd_lrls(sys.z, sys.y, 2, rng);
    // HOOI's subproblem optimum: truncated SVD of Y_(n).
    const Matrix yn = matricize(ttmc(t, std::span<const Matrix>(f), n), n);
    const SvdResult svd = truncated_svd(yn, 2);
    EXPECT_LE((sol.solution() - svd.reconstruct().transpose()).norm(), 1e-6);
  }
}

TEST(SketchedTucker, FullDeterministicSamplingTracksHooi) {
  const DenseTensor t = random_dense({8, 8, 8}, 16);
  TuckerConfig c = config(2);
  const auto [mh, th] = hooi(t, c);
  TuckerConfig d = c;
  d.sketch = SketchKind::leverage_deterministic;
  d.sketch_size = 64;
  d.init = InitKind::hosvd;
  const auto [ms, ts] = sketched_tucker_als(t, d);
  ASSERT_EQ(ts.fitness.size(), th.fitness.size());
  for (std::size_t k = 0; k < ts.fitness.size(); ++k) EXPECT_NEAR(ts.fitness[k], th.fitness[k], 1e-6);
}

TEST(SketchedTucker, SparseInput) {
  SynthSpec spec;
  spec.family = Family::tucker_sparse;
  spec.s = 30;
  spec.rtrue = 3;
  spec.p = 0.5;
  spec.seed = 2;
  const SparseTensor t = gen_tucker_sparse(spec);
  for (auto sk : {SketchKind::tensorsketch, SketchKind::leverage_random}) {
    const auto [model, trace] = sketched_tucker_als(t, config(3, sk, 3));
    EXPECT_GE(trace.fitness.back(), 0.99) << to_string(sk);
  }
}

TEST(SketchedTucker, BitReproducible) {
  const DenseTensor t = random_dense({10, 9, 8}, 17);
  for (auto sk : {SketchKind::tensorsketch, SketchKind::leverage_random}) {
    const auto [a, ta] = sketched_tucker_als(t, config(2, sk, 5));
    const auto [b, tb] = sketched_tucker_als(t, config(2, sk, 5));
    EXPECT_EQ(ta.fitness, tb.fitness);
    EXPECT_EQ(a.core, b.core);
    for (std::size_t n = 0; n < 3; ++n) EXPECT_EQ(a.factors[n], b.factors[n]);
  }
}

TEST(SketchedTucker, RejectsMissingSketch) {
  const DenseTensor t = random_dense({4, 4, 4}, 1);
  EXPECT_THROW(sketched_tucker_als(t, config(2)), std::invalid_argument);
  EXPECT_THROW(hooi(t, config(2, SketchKind::tensorsketch)), std::invalid_argument);
}

TEST(RefTuckerTs, ConvergesOnExactTensor) {
  const DenseTensor t = tensor1(40, 5, 18);
  const auto [model, trace] = ref_tucker_ts(t, config(5, SketchKind::tensorsketch, 4));
  EXPECT_GE(trace.fitness.back(), 0.95);
  for (const auto& a : model.factors) EXPECT_LE(orthonormality_error(a), 1e-8);
}

TEST(RefTuckerTs, SingleSweepTraceIsFinite) {
  const DenseTensor t = random_dense({10, 10, 10}, 19);
  TuckerConfig c = config(2, SketchKind::tensorsketch, 6);
  c.max_sweeps = 1;
  const auto [model, trace] = ref_tucker_ts(t, c);
  ASSERT_EQ(trace.fitness.size(), 1u);
  EXPECT_TRUE(std::isfinite(trace.fitness[0]));
  EXPECT_EQ(trace.residuals.size(), 4u);
  EXPECT_THROW(ref_tucker_ts(t, config(2, SketchKind::leverage_random)), std::invalid_argument);
}

TEST(TuckerDrivers, EarlyStopOnConvergence) {
  const DenseTensor t = tensor1(20, 3, 20);
  TuckerConfig c = config(3);
  c.max_sweeps = 10;
  c.convergence_tol = 1e-9;
  const auto [model, trace] = hooi(t, c);
  EXPECT_LT(trace.fitness.size(), 10u);
}

// Harder instance: rank 5 model of a rank 8 tensor.
TEST(Hooi, NoisyTensorIsMonotoneAndPlateaus) {
  const DenseTensor t = tensor1(200, 8, 21);
  TuckerConfig c = config(5);
  c.init = InitKind::random;
  const auto [model, trace] = hooi(t, c);
  ASSERT_EQ(trace.fitness.size(), 5u);
  for (std::size_t k = 1; k < 5; ++k) EXPECT_GE(trace.fitness[k], trace.fitness[k - 1] - 1e-12);
  EXPECT_LT(trace.fitness[4] - trace.fitness[3], 1e-2);
  EXPECT_GT(trace.fitness[4], 0.2);
  EXPECT_LT(trace.fitness[4], 0.6);
}
