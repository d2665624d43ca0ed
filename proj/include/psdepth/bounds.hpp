#pragma once

#include "psdepth/energy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

namespace psdepth {

/// Caps L^z_j with |M_j z| <= L^z_j assumed on the set where the bounds hold.
struct GradientCaps {
  Vector Lz;

  GradientCaps() = default;
  explicit GradientCaps(Vector caps) : Lz(std::move(caps)) {
    if (!Lz.allFinite() || (Lz.array() < 0.0).any()) throw InputError("gradient caps must be finite and non-negative");
  }

  static GradientCaps uniform(Index n, double cap) { return GradientCaps(Vector::Constant(n, cap)); }

  /// sqrt(1 + (L^z_j)^2)
  Vector Lz_tilde() const { return (1.0 + Lz.array().square()).sqrt().matrix(); }
};

/// Uniform caps at `factor` times the largest gradient of a reference depth.
inline GradientCaps caps_from_reference(const DepthMap& reference, const GradientOperator& op, double factor = 1.5) {
  if (!(factor > 0.0)) throw InputError("caps factor must be positive");
  const Vector g = op.apply(reference.z);
  double largest = 0.0;
  for (Index j = 0; j < op.pixels(); ++j) largest = std::max(largest, std::hypot(g(2 * j), g(2 * j + 1)));
  return GradientCaps::uniform(op.pixels(), factor * largest);
}

struct LipschitzReport {
  Vector L_A_j;
  Vector L_f_j;
  Vector L_p_j;
  double L_A = 0.0;
  double L_f = 0.0;
  double L_grad_f = 0.0;
  double L_q = 0.0;
  /// |M|_2 used by the global constants (0 until global_constants runs).
  double M_norm = 0.0;
};

namespace detail {

inline double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(0);
}

}  // namespace detail

/// Per-pixel bounds L^A_j, L^f_j, L^p_j and their combinations L^A, L^f.
inline LipschitzReport component_bounds(const LightMatrix& lights, const GradientOperator& op, const AlbedoMap& rho,
                                        const GradientCaps& caps) {
  const Index n = op.pixels();
  require_same_grid(rho.grid, op.grid(), "component_bounds");
  require_size(caps.Lz.size(), n, "component_bounds caps");
  const double s_norm = detail::spectral_norm(lights.matrix());
  const double sl_norm = detail::spectral_norm(lights.left());
  const Vector lt = caps.Lz_tilde();

  LipschitzReport r;
  r.L_A_j.resize(n);
  r.L_f_j.resize(n);
  r.L_p_j.resize(n);
  for (Index j = 0; j < n; ++j) {
    const double mj = op.block_norm(j);
    const double lz = caps.Lz(j);
    r.L_A_j(j) = std::abs(rho.rho(j)) * sl_norm * lz * mj;
    r.L_f_j(j) = std::abs(rho.rho(j)) * s_norm * mj * (lt(j) * lz + 1.0);
    r.L_p_j(j) = std::abs(rho.rho(j)) * s_norm * mj * mj * (3.0 * lt(j) * lz * lz + lt(j) + lz);
  }
  r.L_A = n > 0 ? r.L_A_j.maxCoeff() : 0.0;
  r.L_f = r.L_f_j.norm();
  return r;
}

/// Adds the global constants L^q and L^grad_f to the component bounds.
inline LipschitzReport global_constants(const ImageStack& images, const LightMatrix& lights,
                                        const GradientOperator& op, const AlbedoMap& rho, const GradientCaps& caps) {
  require_same_grid(images.grid, op.grid(), "global_constants");
  if (images.count() != lights.count()) throw InputError("global_constants: image/light count mismatch");
  LipschitzReport r = component_bounds(lights, op, rho, caps);
  const Index n = op.pixels();
  const double m = static_cast<double>(images.count());
  const double s_norm = detail::spectral_norm(lights.matrix());
  const double sl_norm = detail::spectral_norm(lights.left());
  const Vector lt = caps.Lz_tilde();
  r.M_norm = op.norm(1e-10);

  double data_sq = 0.0;  // sum_j |I_j|^2 + rho_j^2 |S|^2
  double cross_sq = 0.0; // sum_j rho_j^2 |S|^2 (Lt_j Lz_j)^2 |M_j|^2
  double rho_max = 0.0;
  for (Index j = 0; j < n; ++j) {
    const double rj = std::abs(rho.rho(j));
    const double mj = op.block_norm(j);
    data_sq += images.intensities.col(j).squaredNorm() + rj * rj * s_norm * s_norm;
    cross_sq += std::pow(rj * s_norm * lt(j) * caps.Lz(j) * mj, 2);
    rho_max = std::max(rho_max, rj);
  }
  const double data = std::sqrt(data_sq);
  const double lead = rho_max * sl_norm * r.M_norm;

  r.L_q = (data * r.L_A * r.M_norm + lead * r.L_f) / m;
  r.L_grad_f = (data * (r.L_p_j.norm() + r.L_A * r.M_norm) + r.L_f * (lead + std::sqrt(cross_sq))) / m;
  return r;
}

/// Largest x in the direction of `x` (scaled towards 0) whose blocks satisfy
/// the caps; `fraction` in (0, 1] picks a point along that ray.
inline Vector project_to_caps(const Vector& x, const GradientOperator& op, const GradientCaps& caps,
                              double fraction = 1.0) {
  const Vector g = op.apply(x);
  double scale = 1.0;
  for (Index j = 0; j < op.pixels(); ++j) {
    const double len = std::hypot(g(2 * j), g(2 * j + 1));
    if (len > caps.Lz(j)) scale = std::min(scale, caps.Lz(j) / len);
  }
  return x * (scale * fraction);
}

/// Random pair (x, y) with every |M_j x|, |M_j y| within the caps. The
/// separation |x - y| ranges over several orders of magnitude.
template <class Rng>
std::pair<Vector, Vector> sample_capped_pair(const GradientOperator& op, const GradientCaps& caps, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Index n = op.pixels();
  Vector x(n), dir(n);
  for (Index i = 0; i < n; ++i) x(i) = normal(rng);
  for (Index i = 0; i < n; ++i) dir(i) = normal(rng);
  // Fill the capped set from its interior out to the boundary.
  x = project_to_caps(x * 1e6, op, caps, std::sqrt(unit(rng)));
  const double spread = std::pow(10.0, -6.0 + 6.0 * unit(rng));
  const double x_scale = std::max(x.norm(), 1.0);
  Vector y = x + dir.normalized() * (spread * x_scale);
  y = project_to_caps(y, op, caps);
  return {std::move(x), std::move(y)};
}

/// max |grad(x) - grad(y)| / |x - y| over `samples` capped random pairs.
/// Pair i draws from its own generator seeded by (seed, i).
inline double empirical_lipschitz(const EnergyContext& ctx, int samples, const GradientCaps& caps, std::uint64_t seed,
                                  GradientMode mode = GradientMode::Exact) {
  if (samples < 2) throw InputError("empirical_lipschitz: need at least 2 samples");
  require_size(caps.Lz.size(), ctx.pixels(), "empirical_lipschitz caps");
  double best = 0.0;
  for (int i = 0; i < samples; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(seq);
    const auto [x, y] = sample_capped_pair(ctx.op, caps, rng);
    const double dist = (x - y).norm();
    if (dist == 0.0) continue;
    const double ratio = (grad_f(ctx, x, mode) - grad_f(ctx, y, mode)).norm() / dist;
    best = std::max(best, ratio);
  }
  return best;
}

/// |A(x) - A(y)|_2 for the block-diagonal A: the largest block difference.
inline double block_a_difference_norm(const EnergyContext& ctx, const Vector& x, const Vector& y) {
  const double sl_norm = detail::spectral_norm(ctx.lights.left());
  const Vector gx = ctx.op.apply(x);
  const Vector gy = ctx.op.apply(y);
  double best = 0.0;
  for (Index j = 0; j < ctx.pixels(); ++j) {
    const double sx = 1.0 / std::sqrt(1.0 + gx.segment<2>(2 * j).squaredNorm());
    const double sy = 1.0 / std::sqrt(1.0 + gy.segment<2>(2 * j).squaredNorm());
    best = std::max(best, std::abs(ctx.albedo.rho(j)) * sl_norm * std::abs(sx - sy));
  }
  return best;
}

}  // namespace psdepth
