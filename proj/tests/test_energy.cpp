#include "psdepth/dense_oracle.hpp"
#include "psdepth/energy.hpp"
#include "psdepth/gradcheck.hpp"
#include "psdepth/synthetic.hpp"

#include <gtest/gtest.h>
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <random>
#include <set>

using namespace psdepth;

namespace {

EnergyContext perfect_fit_context(const Grid& g, Index m) {
  const GradientOperator op(g);
  SceneParams p;
  p.albedo_pattern = AlbedoPattern::TwoTone;
  const Scene s = make_scene(SceneKind::SphereCap, g, p);
  const LightMatrix lights = ring_lights(m, 0.6, 0.4);
  return EnergyContext(render_lambertian(s.depth, s.albedo, lights, op), lights, op, s.albedo, 1e-6, s.depth);
}

// Dense reference for f assembled from explicit A, M, b built in the test.
double dense_f(const EnergyContext& ctx, const Vector& z) {
  const Index n = ctx.pixels(), m = ctx.count();
  const Matrix mat = Matrix(ctx.op.matrix());
  const Vector mz = mat * z;
  Matrix a = Matrix::Zero(m * n, 2 * n);
  Vector b(m * n);
  for (Index j = 0; j < n; ++j) {
    const double norm = std::sqrt(1.0 + mz(2 * j) * mz(2 * j) + mz(2 * j + 1) * mz(2 * j + 1));
    for (Index i = 0; i < m; ++i) {
      const auto s = ctx.lights.matrix().row(i);
      a(j * m + i, 2 * j) = -ctx.albedo.rho(j) * s(0) / norm;
      a(j * m + i, 2 * j + 1) = -ctx.albedo.rho(j) * s(1) / norm;
      b(j * m + i) = ctx.images.intensities(i, j) - ctx.albedo.rho(j) * s(2) / norm;
    }
  }
  return (a * mz - b).squaredNorm() / (2.0 * static_cast<double>(m));
}

}  // namespace

TEST(EnergyF, PerfectFitIsZero) {
  const EnergyContext ctx = perfect_fit_context(Grid(9, 7), 5);
  EXPECT_EQ(eval_f(ctx, ctx.prior.z), 0.0);
}

TEST(EnergyF, SinglePixelHandComputation) {
  const Grid g(1, 1);
  Matrix values(3, 1);
  values << 1, 0, 1;
  const EnergyContext ctx(ImageStack(g, values), LightMatrix(Matrix::Identity(3, 3)), GradientOperator(g),
                          AlbedoMap::constant(g, 1.0), 0.0, DepthMap(g, Vector::Zero(1)));
  const Matrix r = residuals(ctx, Vector::Zero(1));
  EXPECT_EQ(r.col(0), Eigen::Vector3d(-1, 0, 0));  // model minus data
  EXPECT_DOUBLE_EQ(eval_f(ctx, Vector::Zero(1)), 1.0 / 6.0);
}

TEST(EnergyF, BlockwiseMatchesDenseAssembly) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const RandomInstance inst = make_random_instance(Grid(3, 3), 4, seed);
    const EnergyContext ctx = inst.context();
    std::mt19937_64 rng(seed + 100);
    const Vector z = random_smooth_depth(Grid(3, 3), rng).z;
    const double ref = dense_f(ctx, z);
    EXPECT_NEAR(eval_f(ctx, z), ref, 1e-13 * ref);
  }
}

TEST(EnergyF, NonNegativeOnRandomInputs) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const RandomInstance inst = make_random_instance(Grid(6, 5), 3 + static_cast<Index>(seed), seed);
    std::mt19937_64 rng(seed);
    EXPECT_GT(eval_f(inst.context(), random_smooth_depth(Grid(6, 5), rng).z), 0.0);
  }
}

TEST(EnergyG, Cases) {
  const RandomInstance inst = make_random_instance(Grid(2, 2), 3, 0);
  EnergyContext ctx = inst.context(1e-6);
  EXPECT_EQ(eval_g(ctx, ctx.prior.z), 0.0);
  Vector z = ctx.prior.z;
  z(0) += 1.0;
  z(3) -= 1.0;
  EXPECT_DOUBLE_EQ(eval_g(ctx, z), 1e-6);
  ctx.lambda = 0.0;
  EXPECT_EQ(eval_g(ctx, z), 0.0);
}

TEST(EnergyContextValidation, RejectsInconsistentInputs) {
  const RandomInstance inst = make_random_instance(Grid(3, 3), 4, 0);
  EXPECT_THROW(EnergyContext(inst.images, ring_lights(3, 0.5), GradientOperator(Grid(3, 3)), inst.albedo, 1e-6,
                             inst.depth),
               InputError);
  EXPECT_THROW(EnergyContext(inst.images, inst.lights, GradientOperator(Grid(3, 3)), inst.albedo, -1.0, inst.depth),
               InputError);
}

TEST(Gradient, ZeroAtPerfectFit) {
  const EnergyContext ctx = perfect_fit_context(Grid(8, 6), 4);
  EXPECT_EQ(grad_f_exact(ctx, ctx.prior.z).lpNorm<Eigen::Infinity>(), 0.0);
  EXPECT_EQ(grad_f_approx(ctx, ctx.prior.z).lpNorm<Eigen::Infinity>(), 0.0);
  EXPECT_EQ(descent_diagnostic(ctx, ctx.prior.z), 0.0);
}

TEST(Gradient, ExactMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Index m = 3 + static_cast<Index>(seed * 17 % 18);
    const Grid g = seed % 2 == 0 ? Grid(8, 8) : Grid(16, 16);
    const RandomInstance inst = make_random_instance(g, m, seed);
    const EnergyContext ctx = inst.context();
    std::mt19937_64 rng(seed + 7);
    const Vector z = random_smooth_depth(g, rng).z;
    EXPECT_LE(relative_linf(grad_f_exact(ctx, z), finite_difference_gradient(ctx, z, 1e-6)), 1e-5)
        << "seed " << seed << " m " << m;
  }
}

TEST(Gradient, ExactMatchesDenseOracle) {
  for (const Grid g : {Grid(2, 2), Grid(3, 2), Grid(4, 4), Grid(5, 3)}) {
    const RandomInstance inst = make_random_instance(g, 4, static_cast<std::uint64_t>(g.size()));
    const EnergyContext ctx = inst.context();
    std::mt19937_64 rng(1);
    const Vector z = random_smooth_depth(g, rng).z;
    EXPECT_LE(relative_linf(grad_f_exact(ctx, z), dense_oracle_grad(ctx, z)), 1e-12);
  }
}

TEST(Gradient, DenseOracleOnSinglePixelIsZero) {
  const RandomInstance inst = make_random_instance(Grid(1, 1), 3, 0);
  EXPECT_EQ(dense_oracle_grad(inst.context(), Vector::Constant(1, 0.3)).norm(), 0.0);
}

TEST(Gradient, DenseOracleGuardsSize) {
  const RandomInstance inst = make_random_instance(Grid(9, 8), 3, 0);
  EXPECT_THROW(dense_oracle_grad(inst.context(), inst.depth.z), InputError);
}

TEST(Gradient, ApproxEqualsExactOnFlatDepth) {
  const RandomInstance inst = make_random_instance(Grid(7, 7), 6, 3);
  const EnergyContext ctx = inst.context();
  const Vector flat = Vector::Constant(49, 0.25);
  const Vector q = grad_f_approx(ctx, flat);
  EXPECT_EQ(q, grad_f_exact(ctx, flat));
  EXPECT_GT(q.norm(), 0.0);
  EXPECT_DOUBLE_EQ(descent_diagnostic(ctx, flat), q.squaredNorm());
}

TEST(Gradient, DifferenceIsPTransposeResidual) {
  const Grid g(6, 5);
  const RandomInstance inst = make_random_instance(g, 5, 9);
  const EnergyContext ctx = inst.context();
  std::mt19937_64 rng(2);
  const Vector z = random_smooth_depth(g, rng).z;
  const Matrix r = residuals(ctx, z);
  Vector expected = Vector::Zero(g.size());
  for (Index j = 0; j < g.size(); ++j) {
    const auto [pj, support] = block_p(ctx, z, j);
    const Vector contrib = pj.transpose() * r.col(j);
    for (std::size_t k = 0; k < support.size(); ++k) expected(support[k]) += contrib(static_cast<Index>(k));
  }
  expected /= static_cast<double>(ctx.count());
  const Vector diff = grad_f_exact(ctx, z) - grad_f_approx(ctx, z);
  EXPECT_LE((diff - expected).lpNorm<Eigen::Infinity>(), 1e-14 * std::max(1.0, expected.lpNorm<Eigen::Infinity>()));
}

TEST(Gradient, BlocksReassembleTheExactGradient) {
  // (1/m) sum_j (A_j M_j + p_j)^T r_j with r_j = A_j M_j z - b_j.
  const Grid g(5, 4);
  const RandomInstance inst = make_random_instance(g, 4, 21);
  const EnergyContext ctx = inst.context();
  std::mt19937_64 rng(4);
  const Vector z = random_smooth_depth(g, rng).z;
  Vector total = Vector::Zero(g.size());
  for (Index j = 0; j < g.size(); ++j) {
    const auto [pj, support] = block_p(ctx, z, j);
    const Matrix mj = ctx.op.block_dense(j, support);
    const Matrix aj = block_a(ctx, z, j);
    const Vector rj = aj * ctx.op.pixel_gradient(z, j) - block_b(ctx, z, j);
    const Vector contrib = (aj * mj + pj).transpose() * rj;
    for (std::size_t k = 0; k < support.size(); ++k) total(support[k]) += contrib(static_cast<Index>(k));
  }
  total /= static_cast<double>(ctx.count());
  EXPECT_LE(relative_linf(grad_f_exact(ctx, z), total), 1e-13);
}

TEST(Gradient, BlockANormBound) {
  const RandomInstance inst = make_random_instance(Grid(6, 6), 7, 5);
  const EnergyContext ctx = inst.context();
  Eigen::JacobiSVD<Matrix> svd_sl(Matrix(ctx.lights.left()));
  const double sl = svd_sl.singularValues()(0);
  for (Index j = 0; j < 36; ++j) {
    Eigen::JacobiSVD<Matrix> svd(block_a(ctx, inst.depth.z, j));
    EXPECT_LE(svd.singularValues()(0), ctx.albedo.rho(j) * sl * (1.0 + 1e-14));
  }
}

TEST(Gradient, BlockPSupportMatchesOperatorRows) {
  const Grid g(5, 4);
  const RandomInstance inst = make_random_instance(g, 3, 2);
  const EnergyContext ctx = inst.context();
  const Matrix mat = Matrix(ctx.op.matrix());
  for (Index j = 0; j < g.size(); ++j) {
    const auto [pj, support] = block_p(ctx, inst.depth.z, j);
    std::set<Index> expected;
    for (Index k = 0; k < g.size(); ++k) {
      if (mat(2 * j, k) != 0.0 || mat(2 * j + 1, k) != 0.0) expected.insert(k);
    }
    EXPECT_EQ(std::set<Index>(support.begin(), support.end()), expected) << "pixel " << j;
    EXPECT_EQ(pj.cols(), static_cast<Index>(support.size()));
    EXPECT_EQ(pj.rows(), ctx.count());
  }
}

TEST(Gradient, HomogeneousOfDegreeTwoInImagesAndAlbedo) {
  const Grid g(6, 6);
  const RandomInstance inst = make_random_instance(g, 5, 8);
  const double kappa = 4.0;  // a power of two keeps the scaling exact
  const EnergyContext a = inst.context();
  const EnergyContext b(ImageStack(g, kappa * inst.images.intensities), inst.lights, GradientOperator(g),
                        AlbedoMap(g, kappa * inst.albedo.rho), 1e-6, inst.depth);
  std::mt19937_64 rng(3);
  const Vector z = random_smooth_depth(g, rng).z;
  EXPECT_EQ(eval_f(b, z), kappa * kappa * eval_f(a, z));
  EXPECT_EQ(grad_f_exact(b, z), kappa * kappa * grad_f_exact(a, z));
  EXPECT_EQ(grad_f_approx(b, z), kappa * kappa * grad_f_approx(a, z));
}

TEST(Gradient, MaskedPixelsDropOut) {
  const Grid g(4, 4);
  const RandomInstance inst = make_random_instance(g, 4, 6);
  Vector mask = Vector::Ones(16);
  mask(5) = 0.0;
  const EnergyContext ctx(inst.images, inst.lights, GradientOperator(g), inst.albedo, 1e-6, inst.depth, mask);
  std::mt19937_64 rng(3);
  const Vector z = random_smooth_depth(g, rng).z;
  const Vector full = reprojection_error_map(DepthMap(g, z), inst.albedo, inst.images, inst.lights, ctx.op);
  EXPECT_NEAR(eval_f(ctx, z), full.sum() - full(5), 1e-14);
  EXPECT_LE(relative_linf(grad_f_exact(ctx, z), finite_difference_gradient(ctx, z)), 1e-5);
  EXPECT_LE(relative_linf(grad_f_exact(ctx, z), dense_oracle_grad(ctx, z)), 1e-12);
}

TEST(MatrixCalculus, DiagonalJacobianInterleavesZeroRows) {
  // A(x) = diag(a_1(x), ..., a_m(x)) with a_i(x) = sin(w_i . x).
  const Index m = 4, n = 3;
  const Matrix w = Matrix::Random(m, n);
  const Vector x = Vector::Random(n);
  const Matrix jac = vec_jacobian(
      [&](Index k) {
        Matrix dk = Matrix::Zero(m, m);
        for (Index i = 0; i < m; ++i) dk(i, i) = std::cos(w.row(i).dot(x)) * w(i, k);
        return dk;
      },
      m, m, n);
  ASSERT_EQ(jac.rows(), m * m);
  for (Index r = 0; r < m * m; ++r) {
    if (r % (m + 1) == 0) {
      const Index i = r / (m + 1);
      for (Index k = 0; k < n; ++k) EXPECT_DOUBLE_EQ(jac(r, k), std::cos(w.row(i).dot(x)) * w(i, k));
    } else {
      EXPECT_TRUE(jac.row(r).isZero(0.0)) << "row " << r;
    }
  }
}

TEST(MatrixCalculus, KroneckerWithIdentitySpreadsEntries) {
  const Eigen::RowVector3d bvec(2.0, -1.0, 5.0);
  const Matrix k = Eigen::kroneckerProduct(Matrix(bvec), Matrix::Identity(3, 3));
  ASSERT_EQ(k.rows(), 3);
  ASSERT_EQ(k.cols(), 9);
  for (Index r = 0; r < 3; ++r)
    for (Index c = 0; c < 9; ++c) EXPECT_EQ(k(r, c), c % 3 == r ? bvec(c / 3) : 0.0);
}

TEST(MatrixCalculus, ProductRuleForAMx) {
  // D[A(x) M x] = ((M x)^T kron I) D[A] + A M, checked by central differences.
  const Index m = 3, n = 4;
  const Matrix mm = Matrix::Random(m, n);
  const Matrix w = Matrix::Random(m * m, n);
  auto a_of = [&](const Vector& x) {
    Matrix a(m, m);
    for (Index c = 0; c < m; ++c)
      for (Index r = 0; r < m; ++r) a(r, c) = std::tanh(w.row(c * m + r).dot(x));
    return a;
  };
  const Vector x = Vector::Random(n);
  const Matrix da = vec_jacobian(
      [&](Index k) {
        Matrix dk(m, m);
        for (Index c = 0; c < m; ++c)
          for (Index r = 0; r < m; ++r) {
            const double t = std::tanh(w.row(c * m + r).dot(x));
            dk(r, c) = (1.0 - t * t) * w(c * m + r, k);
          }
        return dk;
      },
      m, m, n);
  const Matrix analytic =
      Eigen::kroneckerProduct(Matrix((mm * x).transpose()), Matrix::Identity(m, m)) * da + a_of(x) * mm;
  Matrix numeric(m, n);
  const double h = 1e-6;
  for (Index k = 0; k < n; ++k) {
    Vector up = x, down = x;
    up(k) += h;
    down(k) -= h;
    numeric.col(k) = (a_of(up) * mm * up - a_of(down) * mm * down) / (2.0 * h);
  }
  EXPECT_LE((analytic - numeric).cwiseAbs().maxCoeff(), 1e-8);
}
