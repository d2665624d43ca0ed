#include "psdepth/bounds.hpp"
#include "psdepth/synthetic.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace psdepth;

namespace {

// |M_j|_2 for the forward-difference stencil, by counting the neighbours:
// two rows give sqrt(3), one row sqrt(2), none 0.
double stencil_block_norm(const Grid& g, Index j) {
  const Index u = j % g.width(), v = j / g.width();
  const int rows = (u + 1 < g.width() ? 1 : 0) + (v + 1 < g.height() ? 1 : 0);
  return rows == 2 ? std::sqrt(3.0) : rows == 1 ? std::sqrt(2.0) : 0.0;
}

double largest_singular_value(const Matrix& a) {
  return Eigen::JacobiSVD<Matrix>(a).singularValues()(0);
}

struct Instance {
  RandomInstance inst;
  GradientCaps caps;
};

Instance capped_instance(Index size, Index m, std::uint64_t seed) {
  RandomInstance inst = make_random_instance(Grid(size, size), m, seed);
  GradientCaps caps = caps_from_reference(inst.depth, GradientOperator(inst.depth.grid));
  return {std::move(inst), std::move(caps)};
}

}  // namespace

TEST(Caps, ReferenceCapsScaleTheLargestGradient) {
  const Grid g(3, 1);
  const DepthMap d(g, (Vector(3) << 0.0, 2.0, 2.5).finished());
  const GradientCaps caps = caps_from_reference(d, GradientOperator(g), 1.5);
  EXPECT_EQ(caps.Lz, Vector::Constant(3, 3.0));
  EXPECT_NEAR(caps.Lz_tilde()(0), std::sqrt(10.0), 1e-15);
  EXPECT_THROW(GradientCaps(Vector::Constant(2, -1.0)), InputError);
}

TEST(ComponentBounds, ZeroAlbedoGivesZeros) {
  const Grid g(6, 6);
  const LipschitzReport r = component_bounds(ring_lights(5, 0.6), GradientOperator(g), AlbedoMap::constant(g, 0.0),
                                             GradientCaps::uniform(36, 2.0));
  EXPECT_EQ(r.L_A_j.norm() + r.L_f_j.norm() + r.L_p_j.norm(), 0.0);
  EXPECT_EQ(r.L_A, 0.0);
  EXPECT_EQ(r.L_f, 0.0);
}

TEST(ComponentBounds, ZeroCap) {
  const Grid g(4, 3);
  const GradientOperator op(g);
  const LightMatrix lights = ring_lights(4, 0.5);
  const AlbedoMap rho = AlbedoMap::constant(g, 0.7);
  const LipschitzReport r = component_bounds(lights, op, rho, GradientCaps::uniform(12, 0.0));
  const double s_norm = largest_singular_value(lights.matrix());
  for (Index j = 0; j < 12; ++j) {
    EXPECT_EQ(r.L_A_j(j), 0.0);
    EXPECT_NEAR(r.L_f_j(j), 0.7 * s_norm * stencil_block_norm(g, j), 1e-14);
  }
}

TEST(ComponentBounds, MatchHandFormulas) {
  const Grid g(5, 4);
  const GradientOperator op(g);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const LightMatrix lights = random_lights(6, rng);
  Vector rho(20), cap(20);
  for (Index j = 0; j < 20; ++j) {
    rho(j) = unit(rng);
    cap(j) = 3.0 * unit(rng);
  }
  const LipschitzReport r = component_bounds(lights, op, AlbedoMap(g, rho), GradientCaps(cap));
  const double s = largest_singular_value(lights.matrix());
  const double sl = largest_singular_value(Matrix(lights.matrix().leftCols(2)));
  double la = 0.0, lf_sq = 0.0;
  for (Index j = 0; j < 20; ++j) {
    const double mj = stencil_block_norm(g, j);
    const double lt = std::sqrt(1.0 + cap(j) * cap(j));
    const double a = rho(j) * sl * cap(j) * mj;
    const double f = rho(j) * s * mj * (lt * cap(j) + 1.0);
    const double p = rho(j) * s * mj * mj * (3.0 * lt * cap(j) * cap(j) + lt + cap(j));
    EXPECT_NEAR(r.L_A_j(j), a, 1e-13 * std::max(1.0, a));
    EXPECT_NEAR(r.L_f_j(j), f, 1e-13 * std::max(1.0, f));
    EXPECT_NEAR(r.L_p_j(j), p, 1e-13 * std::max(1.0, p));
    la = std::max(la, a);
    lf_sq += f * f;
  }
  EXPECT_NEAR(r.L_A, la, 1e-13 * la);
  EXPECT_NEAR(r.L_f, std::sqrt(lf_sq), 1e-13 * r.L_f);
}

TEST(ComponentBounds, DoublingAlbedoDoublesEveryBound) {
  const Grid g(6, 5);
  const GradientOperator op(g);
  const RandomInstance inst = make_random_instance(g, 4, 3);
  const GradientCaps caps = caps_from_reference(inst.depth, op);
  const LipschitzReport a = component_bounds(inst.lights, op, inst.albedo, caps);
  const LipschitzReport b = component_bounds(inst.lights, op, AlbedoMap(g, 2.0 * inst.albedo.rho), caps);
  EXPECT_EQ(b.L_A_j, 2.0 * a.L_A_j);
  EXPECT_EQ(b.L_f_j, 2.0 * a.L_f_j);
  EXPECT_EQ(b.L_p_j, 2.0 * a.L_p_j);
}

TEST(GlobalConstants, ApproxConstantMatchesHandFormula) {
  const Instance in = capped_instance(5, 4, 8);
  const RandomInstance& inst = in.inst;
  const Grid g = inst.depth.grid;
  const GradientOperator op(g);
  const LipschitzReport r = global_constants(inst.images, inst.lights, op, inst.albedo, in.caps);
  const double s = largest_singular_value(inst.lights.matrix());
  const double sl = largest_singular_value(Matrix(inst.lights.matrix().leftCols(2)));
  const double mnorm = largest_singular_value(Matrix(op.matrix()));
  EXPECT_NEAR(r.M_norm, mnorm, 1e-8);
  double data = 0.0;
  for (Index j = 0; j < g.size(); ++j) data += inst.images.intensities.col(j).squaredNorm() + std::pow(inst.albedo.rho(j) * s, 2);
  const double expected =
      (std::sqrt(data) * r.L_A * mnorm + inst.albedo.rho.maxCoeff() * sl * mnorm * r.L_f) / static_cast<double>(inst.lights.count());
  EXPECT_NEAR(r.L_q, expected, 1e-8 * expected);
}

TEST(GlobalConstants, ZeroAlbedoGivesZeroApproxConstant) {
  const RandomInstance inst = make_random_instance(Grid(6, 6), 5, 1);
  const GradientOperator op(inst.depth.grid);
  const AlbedoMap zero = AlbedoMap::constant(inst.depth.grid, 0.0);
  const LipschitzReport r = global_constants(inst.images, inst.lights, op, zero, caps_from_reference(inst.depth, op));
  EXPECT_EQ(r.L_q, 0.0);
  EXPECT_EQ(r.L_grad_f, 0.0);
  const EnergyContext ctx(inst.images, inst.lights, op, zero, 1e-6, inst.depth);
  EXPECT_EQ(grad_f_approx(ctx, inst.depth.z).norm(), 0.0);
}

TEST(GlobalConstants, ExactBoundDominatesApproxBound) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Instance in = capped_instance(4 + static_cast<Index>(seed % 5), 3 + static_cast<Index>(seed % 7), seed);
    const GradientOperator op(in.inst.depth.grid);
    const LipschitzReport r = global_constants(in.inst.images, in.inst.lights, op, in.inst.albedo, in.caps);
    EXPECT_GE(r.L_grad_f, r.L_q);
  }
}

TEST(Sampling, PairsRespectCaps) {
  const Instance in = capped_instance(8, 4, 2);
  const GradientOperator op(in.inst.depth.grid);
  std::mt19937_64 rng(0);
  for (int i = 0; i < 100; ++i) {
    const auto [x, y] = sample_capped_pair(op, in.caps, rng);
    const Vector gx = op.apply(x), gy = op.apply(y);
    for (Index j = 0; j < op.pixels(); ++j) {
      EXPECT_LE(std::hypot(gx(2 * j), gx(2 * j + 1)), in.caps.Lz(j) * (1.0 + 1e-12));
      EXPECT_LE(std::hypot(gy(2 * j), gy(2 * j + 1)), in.caps.Lz(j) * (1.0 + 1e-12));
    }
  }
}

TEST(Sampling, DifferenceQuotientsStayBelowBounds) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Instance in = capped_instance(16, 5, seed);
    const EnergyContext ctx = in.inst.context();
    const LipschitzReport r = global_constants(in.inst.images, in.inst.lights, ctx.op, in.inst.albedo, in.caps);
    EXPECT_LE(empirical_lipschitz(ctx, 200, in.caps, seed, GradientMode::Approx), r.L_q);
    EXPECT_LE(empirical_lipschitz(ctx, 200, in.caps, seed, GradientMode::Exact), r.L_grad_f);
  }
}

TEST(Sampling, BlockDifferenceStaysBelowLA) {
  const Instance in = capped_instance(10, 4, 5);
  const EnergyContext ctx = in.inst.context();
  const LipschitzReport r = component_bounds(ctx.lights, ctx.op, ctx.albedo, in.caps);
  std::mt19937_64 rng(3);
  double envelope = 0.0;
  for (int i = 0; i < 500; ++i) {
    const auto [x, y] = sample_capped_pair(ctx.op, in.caps, rng);
    const double dist = (x - y).norm();
    if (dist == 0.0) continue;
    envelope = std::max(envelope, block_a_difference_norm(ctx, x, y) / dist);
  }
  EXPECT_GT(envelope, 0.0);
  EXPECT_LE(envelope, r.L_A);
}

TEST(Sampling, BlockDifferenceMatchesDenseNorm) {
  const Instance in = capped_instance(3, 4, 6);
  const EnergyContext ctx = in.inst.context();
  std::mt19937_64 rng(1);
  const auto [x, y] = sample_capped_pair(ctx.op, in.caps, rng);
  const Index n = ctx.pixels(), m = ctx.count();
  Matrix diff = Matrix::Zero(m * n, 2 * n);
  for (Index j = 0; j < n; ++j) diff.block(j * m, 2 * j, m, 2) = block_a(ctx, x, j) - block_a(ctx, y, j);
  EXPECT_NEAR(block_a_difference_norm(ctx, x, y), largest_singular_value(diff), 1e-13);
}

TEST(Sampling, EmpiricalProbeIsDeterministic) {
  const Instance in = capped_instance(8, 4, 1);
  const EnergyContext ctx = in.inst.context();
  EXPECT_EQ(empirical_lipschitz(ctx, 50, in.caps, 42), empirical_lipschitz(ctx, 50, in.caps, 42));
  EXPECT_THROW(empirical_lipschitz(ctx, 1, in.caps, 42), InputError);
}

TEST(Sampling, ZeroAlbedoProbeIsZero) {
  const RandomInstance inst = make_random_instance(Grid(6, 6), 4, 0);
  const GradientOperator op(inst.depth.grid);
  const EnergyContext ctx(inst.images, inst.lights, op, AlbedoMap::constant(inst.depth.grid, 0.0), 1e-6, inst.depth);
  EXPECT_EQ(empirical_lipschitz(ctx, 20, caps_from_reference(inst.depth, op), 1), 0.0);
}
