#include "support.hpp"

using namespace rtucker;
using rtucker::test::max_abs_diff;
using rtucker::test::random_dense;
using rtucker::test::random_matrix;
using rtucker::test::random_sparse;

TEST(DenseTensor, RejectsDataLengthMismatch) {
  EXPECT_THROW(DenseTensor(Shape{2, 3}, std::vector<double>(5)), dimension_error);
  EXPECT_THROW(DenseTensor(Shape{}), dimension_error);
  EXPECT_THROW(DenseTensor(Shape{2, 0}), dimension_error);
}

TEST(DenseTensor, RowMajorLastIndexFastest) {
  DenseTensor t(Shape{2, 3, 4});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  EXPECT_EQ(t.at({0, 0, 1}), 1.0);
  EXPECT_EQ(t.at({0, 1, 0}), 4.0);
  EXPECT_EQ(t.at({1, 0, 0}), 12.0);
}

TEST(SparseTensor, SortsInputAndRejectsDuplicates) {
  SparseTensor t(Shape{3, 3}, {2, 1, 0, 2, 1, 0}, {1.0, 2.0, 3.0});
  EXPECT_EQ(t.index(0, 0), 0u);
  EXPECT_EQ(t.value(0), 2.0);
  EXPECT_EQ(t.value(2), 1.0);
  EXPECT_THROW(SparseTensor(Shape{3, 3}, {1, 1, 1, 1}, {1.0, 2.0}), dimension_error);
  EXPECT_THROW(SparseTensor(Shape{3, 3}, {3, 0}, {1.0}), dimension_error);
  EXPECT_THROW(SparseTensor(Shape{3, 3}, {0, 0, 1}, {1.0}), dimension_error);
}

TEST(SparseTensor, DenseRoundTrip) {
  const SparseTensor s = random_sparse({4, 5, 3}, 0.3, 2);
  const DenseTensor d = s.to_dense();
  const SparseTensor back = SparseTensor::from_dense(d);
  ASSERT_EQ(back.nnz(), s.nnz());
  for (std::size_t k = 0; k < s.nnz(); ++k) {
    EXPECT_EQ(back.value(k), s.value(k));
    for (std::size_t m = 0; m < 3; ++m) EXPECT_EQ(back.index(k, m), s.index(k, m));
  }
  EXPECT_DOUBLE_EQ(s.squared_norm(), d.squared_norm());
}

TEST(Matricize, SmallCubeMatchesIndexFormula) {
  DenseTensor t(Shape{2, 2, 2});
  for (std::size_t i = 0; i < 8; ++i) t[i] = static_cast<double>(i + 1);
  for (std::size_t mode = 0; mode < 3; ++mode) {
    const Matrix m = matricize(t, mode);
    ASSERT_EQ(m.rows(), 2);
    ASSERT_EQ(m.cols(), 4);
    std::vector<double> seen;
    for (Eigen::Index i = 0; i < 2; ++i) {
      for (Eigen::Index j = 0; j < 4; ++j) {
        EXPECT_EQ(m(i, j), rtucker::test::unfolding_entry(t, mode, static_cast<std::size_t>(i), static_cast<std::size_t>(j)));
        seen.push_back(m(i, j));
      }
    }
    std::sort(seen.begin(), seen.end());
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(seen[i], static_cast<double>(i + 1));
  }
  // Mode 0: columns enumerate (i2, i3) with i2 slowest.
  const Matrix m0 = matricize(t, 0);
  EXPECT_EQ(m0(0, 1), t.at({0, 0, 1}));
  EXPECT_EQ(m0(1, 2), t.at({1, 1, 0}));
  // Mode 2: columns enumerate (i1, i2) with i1 slowest.
  const Matrix m2 = matricize(t, 2);
  EXPECT_EQ(m2(1, 1), t.at({0, 1, 1}));
  EXPECT_EQ(m2(0, 2), t.at({1, 0, 0}));
}

TEST(Matricize, OrderOneIsColumn) {
  const DenseTensor t(Shape{4}, {1, 2, 3, 4});
  const Matrix m = matricize(t, 0);
  ASSERT_EQ(m.rows(), 4);
  ASSERT_EQ(m.cols(), 1);
  EXPECT_EQ(m(2, 0), 3.0);
}

TEST(Matricize, SparseSingleEntry) {
  const SparseTensor t(Shape{2, 3, 2}, {0, 1, 0}, {5.0});
  for (std::size_t mode = 0; mode < 3; ++mode) {
    const CooMatrix m = matricize(t, mode);
    ASSERT_EQ(m.nnz(), 1u);
    EXPECT_EQ(m.val[0], 5.0);
    EXPECT_TRUE(m.to_dense().isApprox(matricize(t.to_dense(), mode)));
  }
}

TEST(Matricize, ModeOutOfRangeThrows) {
  const DenseTensor t(Shape{2, 2});
  EXPECT_THROW(matricize(t, 2), dimension_error);
}

TEST(Matricize, FoldRoundTripAllModes) {
  const DenseTensor t = random_dense({3, 4, 2, 5}, 11);
  for (std::size_t mode = 0; mode < 4; ++mode) {
    EXPECT_EQ(fold(matricize(t, mode), mode, t.shape()), t);
  }
}

TEST(Ttm, IdentityIsNoop) {
  const DenseTensor t = random_dense({3, 4, 5}, 1);
  for (std::size_t n = 0; n < 3; ++n) {
    const auto s = static_cast<Eigen::Index>(t.extent(n));
    EXPECT_LE(max_abs_diff(ttm(t, Matrix::Identity(s, s), n), t), 0.0);
  }
}

TEST(Ttm, DistinctModesCommute) {
  const DenseTensor t = random_dense({3, 4, 5}, 2);
  const Matrix a = random_matrix(6, 4, 3);
  const Matrix b = random_matrix(2, 5, 4);
  EXPECT_LE(max_abs_diff(ttm(ttm(t, a, 1), b, 2), ttm(ttm(t, b, 2), a, 1)), 1e-12);
}

TEST(Ttm, MatchesMatricizeMultiplyFold) {
  const DenseTensor t = random_dense({2, 3, 2}, 5);
  const Matrix m = random_matrix(4, 3, 6);
  const DenseTensor got = ttm(t, m, 1);
  const DenseTensor want = fold(m * matricize(t, 1), 1, Shape{2, 4, 2});
  EXPECT_LE(max_abs_diff(got, want), 1e-12);
}

TEST(Ttm, SquareOrthogonalPreservesNorm) {
  CounterRng rng(7);
  const DenseTensor t = random_dense({5, 4, 6}, rng);
  for (std::size_t n = 0; n < 3; ++n) {
    const auto s = static_cast<Eigen::Index>(t.extent(n));
    EXPECT_NEAR(ttm(t, random_orthonormal(s, s, rng), n).norm(), t.norm(), 1e-10);
  }
}

TEST(Ttm, DimensionMismatchThrows) {
  const DenseTensor t = random_dense({2, 3}, 1);
  EXPECT_THROW(ttm(t, Matrix::Identity(2, 2), 1), dimension_error);
}

TEST(Ttmc, IdentityFactorsReturnTensor) {
  const DenseTensor t = random_dense({3, 4, 5}, 8);
  std::vector<Matrix> f;
  for (auto s : t.shape()) f.push_back(Matrix::Identity(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s)));
  EXPECT_LE(max_abs_diff(ttmc(t, f, std::size_t{1}), t), 0.0);
  EXPECT_LE(max_abs_diff(ttmc_all(t, std::span<const Matrix>(f)), t), 0.0);
}

TEST(Ttmc, ExactTuckerHasBoundedUnfoldingRank) {
  SynthSpec spec;
  spec.s = 12;
  spec.rtrue = 3;
  spec.seed = 4;
  const DenseTensor t = gen_tucker_dense(spec);
  CounterRng rng(9);
  const auto factors = hosvd_init(t, Shape{3, 3, 3}, rng);
  for (std::size_t n = 0; n < 3; ++n) {
    const DenseTensor y = ttmc(t, std::span<const Matrix>(factors), n);
    const SvdResult svd = thin_svd(matricize(y, n));
    for (Eigen::Index k = 3; k < svd.singular_values.size(); ++k) {
      EXPECT_LT(svd.singular_values[k], 1e-9 * svd.singular_values[0]);
    }
  }
}

TEST(Ttmc, DenseAndSparsePathsAgree) {
  const SparseTensor s = random_sparse({5, 6, 4}, 0.25, 3);
  const DenseTensor d = s.to_dense();
  CounterRng rng(4);
  std::vector<Matrix> f{random_orthonormal(5, 2, rng), random_orthonormal(6, 3, rng), random_orthonormal(4, 2, rng)};
  for (std::size_t n = 0; n < 3; ++n) {
    EXPECT_LE(max_abs_diff(ttmc(s, std::span<const Matrix>(f), n), ttmc(d, std::span<const Matrix>(f), n)), 1e-12);
  }
  EXPECT_LE(max_abs_diff(ttmc_all(s, std::span<const Matrix>(f)), ttmc_all(d, std::span<const Matrix>(f))), 1e-12);
}

TEST(Ttmc, Errors) {
  const DenseTensor t = random_dense({3, 4}, 1);
  std::vector<Matrix> f{Matrix::Identity(3, 3), Matrix::Identity(3, 3)};
  EXPECT_THROW(ttmc(t, std::span<const Matrix>(f), std::size_t{0}), dimension_error);
  std::vector<Matrix> g{Matrix::Identity(3, 3), Matrix::Identity(4, 4)};
  EXPECT_THROW(ttmc(t, std::span<const Matrix>(g), std::size_t{2}), dimension_error);
}

// The unfolding identity T_(n)^T = P C_(n)^T A^T with P the Kronecker product
// of the other factors in ascending mode order pins the linearization.
TEST(Linearization, UnfoldingIdentityOfExactTucker) {
  CounterRng rng(21);
  const Shape ranks{2, 3, 2, 2};
  const Shape shape{4, 5, 3, 4};
  DenseTensor core = random_dense(ranks, rng);
  std::vector<Matrix> factors;
  for (std::size_t n = 0; n < 4; ++n) {
    factors.push_back(random_orthonormal(static_cast<Eigen::Index>(shape[n]), static_cast<Eigen::Index>(ranks[n]), rng));
  }
  const TuckerModel model{core, factors};
  const DenseTensor t = model.reconstruct();
  for (std::size_t n = 0; n < 4; ++n) {
    std::vector<Matrix> rest;
    for (std::size_t k = 0; k < 4; ++k) {
      if (k != n) rest.push_back(factors[k]);
    }
    const Matrix p = kronecker(std::span<const Matrix>(rest));
    const Matrix rhs = p * matricize(core, n).transpose() * factors[n].transpose();
    EXPECT_LE((matricize(t, n).transpose() - rhs).norm(), 1e-8) << "mode " << n;
  }
}

TEST(Mttkrp, OrderTwoIsMatrixProduct) {
  const DenseTensor t = random_dense({4, 5}, 3);
  const Matrix b = random_matrix(5, 2, 4);
  std::vector<Matrix> f{random_matrix(4, 2, 5), b};
  const Matrix got = mttkrp(t, std::span<const Matrix>(f), 0);
  EXPECT_LE((got - matricize(t, 0) * b).norm(), 1e-12);
}

TEST(Mttkrp, MatchesExplicitKhatriRao) {
  const DenseTensor t = random_dense({3, 3, 3}, 6);
  std::vector<Matrix> f{random_matrix(3, 2, 7), random_matrix(3, 2, 8), random_matrix(3, 2, 9)};
  const SparseTensor s = SparseTensor::from_dense(t);
  for (std::size_t n = 0; n < 3; ++n) {
    std::vector<Matrix> rest;
    for (std::size_t k = 0; k < 3; ++k) {
      if (k != n) rest.push_back(f[k]);
    }
    const Matrix want = matricize(t, n) * khatri_rao(std::span<const Matrix>(rest));
    EXPECT_LE((mttkrp(t, std::span<const Matrix>(f), n) - want).norm(), 1e-10);
    EXPECT_LE((mttkrp(s, std::span<const Matrix>(f), n) - want).norm(), 1e-10);
  }
}

TEST(Mttkrp, ZeroSparseTensorGivesZero) {
  const SparseTensor t(Shape{3, 4, 2});
  std::vector<Matrix> f{random_matrix(3, 2, 1), random_matrix(4, 2, 2), random_matrix(2, 2, 3)};
  const Matrix m = mttkrp(t, std::span<const Matrix>(f), 1);
  EXPECT_EQ(m.rows(), 4);
  EXPECT_EQ(m.norm(), 0.0);
}

TEST(Mttkrp, ColumnMismatchThrows) {
  const DenseTensor t = random_dense({3, 4, 2}, 1);
  std::vector<Matrix> f{random_matrix(3, 2, 1), random_matrix(4, 3, 2), random_matrix(2, 2, 3)};
  EXPECT_THROW(mttkrp(t, std::span<const Matrix>(f), 0), dimension_error);
}

TEST(KhatriRao, SingleMatrixIsItself) {
  const Matrix a = random_matrix(4, 3, 1);
  std::vector<Matrix> f{a};
  EXPECT_EQ(khatri_rao(std::span<const Matrix>(f)), a);
}

TEST(KhatriRao, TwoVectorsGiveOuterProductFirstSlowest) {
  Matrix a(2, 1), b(3, 1);
  a << 1, 2;
  b << 3, 4, 5;
  std::vector<Matrix> f{a, b};
  const Matrix k = khatri_rao(std::span<const Matrix>(f));
  ASSERT_EQ(k.rows(), 6);
  for (Eigen::Index i = 0; i < 2; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) EXPECT_EQ(k(i * 3 + j, 0), a(i, 0) * b(j, 0));
  }
}

TEST(KhatriRao, MatchesDoubleLoop) {
  const Matrix a = random_matrix(2, 2, 3);
  const Matrix b = random_matrix(3, 2, 4);
  std::vector<Matrix> f{a, b};
  const Matrix k = khatri_rao(std::span<const Matrix>(f));
  ASSERT_EQ(k.rows(), 6);
  ASSERT_EQ(k.cols(), 2);
  for (Eigen::Index i = 0; i < 2; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) {
      for (Eigen::Index r = 0; r < 2; ++r) EXPECT_DOUBLE_EQ(k(i * 3 + j, r), a(i, r) * b(j, r));
    }
  }
  std::vector<Matrix> bad{a, random_matrix(3, 3, 5)};
  EXPECT_THROW(khatri_rao(std::span<const Matrix>(bad)), dimension_error);
}

TEST(Kronecker, MatchesEntrywiseDefinition) {
  const Matrix a = random_matrix(2, 3, 1);
  const Matrix b = random_matrix(4, 2, 2);
  std::vector<Matrix> f{a, b};
  const Matrix k = kronecker(std::span<const Matrix>(f));
  ASSERT_EQ(k.rows(), 8);
  ASSERT_EQ(k.cols(), 6);
  for (Eigen::Index i = 0; i < 2; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) {
      for (Eigen::Index p = 0; p < 4; ++p) {
        for (Eigen::Index q = 0; q < 2; ++q) EXPECT_DOUBLE_EQ(k(i * 4 + p, j * 2 + q), a(i, j) * b(p, q));
      }
    }
  }
}

TEST(Fitness, ExactModelIsOne) {
  CounterRng rng(3);
  const DenseTensor core = random_dense({2, 2, 2}, rng);
  std::vector<Matrix> f{random_orthonormal(4, 2, rng), random_orthonormal(5, 2, rng), random_orthonormal(3, 2, rng)};
  const TuckerModel model{core, f};
  EXPECT_NEAR(fitness(model.reconstruct(), model), 1.0, 1e-7);
}

TEST(Fitness, ZeroModelIsZero) {
  const DenseTensor t = random_dense({3, 3, 3}, 4);
  const TuckerModel model{DenseTensor(Shape{2, 2, 2}), {Matrix::Zero(3, 2), Matrix::Zero(3, 2), Matrix::Zero(3, 2)}};
  EXPECT_NEAR(fitness(t, model), 0.0, 1e-14);
  CPModel cp{{Matrix::Zero(3, 2), Matrix::Zero(3, 2), Matrix::Zero(3, 2)}, Vector::Zero(2)};
  EXPECT_NEAR(fitness(t, cp), 0.0, 1e-14);
}

TEST(Fitness, ZeroTensorThrows) {
  const DenseTensor t(Shape{2, 2});
  const TuckerModel model{DenseTensor(Shape{1, 1}), {Matrix::Ones(2, 1), Matrix::Ones(2, 1)}};
  EXPECT_THROW(fitness(t, model), std::domain_error);
}

TEST(Fitness, MatchesDenseReconstructionOracle) {
  CounterRng rng(12);
  for (int rep = 0; rep < 10; ++rep) {
    const DenseTensor t = random_dense({4, 4, 4}, rng);
    const DenseTensor core = random_dense({2, 2, 2}, rng);
    std::vector<Matrix> f{random_orthonormal(4, 2, rng), random_orthonormal(4, 2, rng), random_orthonormal(4, 2, rng)};
    const TuckerModel model{core, f};
    EXPECT_NEAR(fitness(t, model), dense_fitness(t, model.reconstruct()), 1e-8);
    // Non-orthonormal factors go through the same expansion.
    const TuckerModel skew{core, {gaussian_matrix(4, 2, rng), gaussian_matrix(4, 2, rng), gaussian_matrix(4, 2, rng)}};
    EXPECT_NEAR(fitness(t, skew), dense_fitness(t, skew.reconstruct()), 1e-8);
  }
}

TEST(Fitness, SparsePathMatchesDensePath) {
  CounterRng rng(13);
  for (int rep = 0; rep < 5; ++rep) {
    const SparseTensor s = random_sparse({5, 4, 6}, 0.3, 100 + rep);
    const DenseTensor d = s.to_dense();
    const TuckerModel model{random_dense({2, 2, 3}, rng),
                            {random_orthonormal(5, 2, rng), random_orthonormal(4, 2, rng), random_orthonormal(6, 3, rng)}};
    EXPECT_NEAR(fitness(s, model), fitness(d, model), 1e-8);
    EXPECT_NEAR(fitness(s, model), dense_fitness(d, model.reconstruct()), 1e-8);
    CPModel cp{{gaussian_matrix(5, 3, rng), gaussian_matrix(4, 3, rng), gaussian_matrix(6, 3, rng)}, Vector::Ones(3)};
    EXPECT_NEAR(fitness(s, cp), dense_fitness(d, cp.reconstruct()), 1e-8);
  }
}

TEST(CPModel, GramHadamardNormMatchesReconstruction) {
  CounterRng rng(14);
  for (int rep = 0; rep < 5; ++rep) {
    CPModel cp{{gaussian_matrix(6, 3, rng), gaussian_matrix(5, 3, rng), gaussian_matrix(7, 3, rng)}, gaussian_matrix(3, 1, rng)};
    EXPECT_NEAR(cp.squared_norm(), cp.reconstruct().squared_norm(), 1e-8 * cp.squared_norm());
  }
}

TEST(ModeUnfolding, DenseAndSparseOperationsMatchExplicitMatrices) {
  const SparseTensor s = random_sparse({4, 3, 5}, 0.4, 15);
  const DenseTensor d = s.to_dense();
  for (std::size_t n = 0; n < 3; ++n) {
    const Matrix tn_t = matricize(d, n).transpose();
    for (const ModeUnfolding& u : {ModeUnfolding(d, n), ModeUnfolding(s, n)}) {
      ASSERT_EQ(u.rows(), static_cast<std::size_t>(tn_t.rows()));
      ASSERT_EQ(u.cols(), static_cast<std::size_t>(tn_t.cols()));
      EXPECT_LE((u.gram() - tn_t.transpose() * tn_t).norm(), 1e-10);
      const Matrix x = random_matrix(static_cast<Eigen::Index>(u.rows()), 2, 16);
      EXPECT_LE((u.times(x) - tn_t.transpose() * x).norm(), 1e-10);
      const Matrix q = random_matrix(static_cast<Eigen::Index>(u.cols()), 2, 17);
      EXPECT_LE((u.transpose_times(q) - tn_t * q).norm(), 1e-10);
      std::vector<double> row(u.cols(), 0.0);
      u.add_row(3, 2.0, row.data());
      for (std::size_t c = 0; c < u.cols(); ++c) EXPECT_DOUBLE_EQ(row[c], 2.0 * tn_t(3, static_cast<Eigen::Index>(c)));
    }
  }
}
