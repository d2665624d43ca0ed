#pragma once

#include "psdepth/core.hpp"
#include "psdepth/energy.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace psdepth {

/// m random unit lights with polar angle in [0.2, 0.8] rad.
inline LightMatrix random_lights(Index m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> tilt(0.2, 0.8);
  std::uniform_real_distribution<double> azimuth(0.0, 2.0 * std::numbers::pi);
  LightMatrix::Storage s(m, 3);
  for (Index i = 0; i < m; ++i) {
    const double t = tilt(rng);
    const double a = azimuth(rng);
    s.row(i) << std::sin(t) * std::cos(a), std::sin(t) * std::sin(a), std::cos(t);
  }
  return LightMatrix(std::move(s));
}

/// Smooth random depth: a sum of three separable cosines with slopes well
/// below 3.
inline DepthMap random_smooth_depth(const Grid& grid, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> amp(0.2, 1.0);
  std::uniform_real_distribution<double> freq(0.1, 0.6);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  Vector z = Vector::Zero(grid.size());
  for (int t = 0; t < 3; ++t) {
    const double a = amp(rng), wu = freq(rng), wv = freq(rng), pu = phase(rng), pv = phase(rng);
    for (Index v = 0; v < grid.height(); ++v) {
      for (Index u = 0; u < grid.width(); ++u) {
        z(grid.index(u, v)) += a * std::cos(wu * static_cast<double>(u) + pu) * std::cos(wv * static_cast<double>(v) + pv);
      }
    }
  }
  return {grid, std::move(z)};
}

/// A random problem instance: smooth depth, albedo in [0.4, 1], random
/// lights and images rendered from the depth with additive noise, so the
/// data term is nonzero at the returned depth.
struct RandomInstance {
  DepthMap depth;
  AlbedoMap albedo;
  LightMatrix lights;
  ImageStack images;

  EnergyContext context(double lambda = 1e-6) const {
    return EnergyContext(images, lights, GradientOperator(depth.grid), albedo, lambda, depth);
  }
};

inline RandomInstance make_random_instance(const Grid& grid, Index m, std::uint64_t seed, double noise = 0.05) {
  std::mt19937_64 rng(seed);
  DepthMap depth = random_smooth_depth(grid, rng);
  std::uniform_real_distribution<double> albedo(0.4, 1.0);
  Vector rho(grid.size());
  for (Index j = 0; j < grid.size(); ++j) rho(j) = albedo(rng);
  AlbedoMap rho_map(grid, std::move(rho));
  LightMatrix lights = random_lights(m, rng);
  const GradientOperator op(grid);
  ImageStack images = render_lambertian(depth, rho_map, lights, op);
  std::normal_distribution<double> normal(0.0, noise);
  for (Index i = 0; i < images.intensities.size(); ++i) images.intensities.data()[i] += normal(rng);
  return {std::move(depth), std::move(rho_map), std::move(lights), std::move(images)};
}

}  // namespace psdepth
