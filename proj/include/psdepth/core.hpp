#pragma once

#include "psdepth/gradient_operator.hpp"
#include "psdepth/types.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <utility>

namespace psdepth {

/// Orthographic normals n_j = [-M_j z, 1] / sqrt(|M_j z|^2 + 1).
inline NormalField normals_from_depth(const DepthMap& depth, const GradientOperator& op) {
  require_same_grid(depth.grid, op.grid(), "normals_from_depth");
  const Vector g = op.apply(depth.z);
  const Index n = depth.grid.size();
  NormalField::Storage out(n, 3);
  for (Index j = 0; j < n; ++j) {
    const double gu = g(2 * j);
    const double gv = g(2 * j + 1);
    const double inv = 1.0 / std::sqrt(gu * gu + gv * gv + 1.0);
    out(j, 0) = -gu * inv;
    out(j, 1) = -gv * inv;
    out(j, 2) = inv;
  }
  return {depth.grid, std::move(out)};
}

/// Lambertian images I^i_j = rho_j s_i . n_j(z). Negative values are kept
/// unless `clamp_negative` is set, so the rendering matches the energy model.
/// The arithmetic is the same as in the energy's residual, so rendered data
/// evaluated at its own (z, rho) has a residual of exactly zero.
inline ImageStack render_lambertian(const DepthMap& depth, const AlbedoMap& albedo,
                                    const LightMatrix& lights, const GradientOperator& op,
                                    bool clamp_negative = false) {
  require_same_grid(depth.grid, op.grid(), "render_lambertian");
  require_same_grid(albedo.grid, op.grid(), "render_lambertian");
  const Vector g = op.apply(depth.z);
  const auto& s = lights.matrix();
  Matrix images(lights.count(), depth.grid.size());
  for (Index j = 0; j < images.cols(); ++j) {
    const double gu = g(2 * j);
    const double gv = g(2 * j + 1);
    const double scale = albedo.rho(j) * (1.0 / std::sqrt(1.0 + gu * gu + gv * gv));
    for (Index i = 0; i < images.rows(); ++i) images(i, j) = scale * (-s(i, 0) * gu - s(i, 1) * gv + s(i, 2));
  }
  if (clamp_negative) images = images.cwiseMax(0.0);
  return {depth.grid, std::move(images)};
}

/// Adds i.i.d. N(0, (sigma * max I)^2) noise. The result is not clamped.
inline ImageStack add_gaussian_noise(const ImageStack& images, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw InputError("noise sigma must be non-negative");
  ImageStack out = images;
  if (sigma == 0.0 || images.intensities.size() == 0) return out;
  const double stddev = sigma * images.intensities.maxCoeff();
  if (stddev == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  // Fixed traversal order: image-major, then pixel.
  for (Index i = 0; i < out.intensities.rows(); ++i) {
    for (Index j = 0; j < out.intensities.cols(); ++j) out.intensities(i, j) += normal(rng);
  }
  return out;
}

/// Angle in radians between two unit vectors, stable near 0 and pi.
inline double angle_between(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

/// Mean angular error in degrees.
inline double mean_angular_error(const NormalField& est, const NormalField& gt) {
  require_same_grid(est.grid, gt.grid, "mean_angular_error");
  const Index n = est.grid.size();
  double sum = 0.0;
  for (Index j = 0; j < n; ++j) {
    sum += angle_between(est.normals.row(j).transpose(), gt.normals.row(j).transpose());
  }
  return sum / static_cast<double>(n) * 180.0 / std::numbers::pi;
}

/// Per-pixel share (1/2m)|I_j - R_j(z, rho)|^2 of the data term.
inline Vector reprojection_error_map(const DepthMap& depth, const AlbedoMap& albedo,
                                     const ImageStack& images, const LightMatrix& lights,
                                     const GradientOperator& op) {
  require_same_grid(images.grid, op.grid(), "reprojection_error_map");
  if (images.count() != lights.count()) throw InputError("reprojection_error_map: image/light count mismatch");
  const ImageStack rendered = render_lambertian(depth, albedo, lights, op);
  const double scale = 0.5 / static_cast<double>(images.count());
  return scale * (images.intensities - rendered.intensities).colwise().squaredNorm().transpose();
}

// ---------------------------------------------------------------------------
// Synthetic scenes

enum class SceneKind { SphereCap, GaussianBump, Plane };

enum class AlbedoPattern { Constant, TwoTone };

struct SceneParams {
  /// Sphere radius in pixels; 0 selects 1.5 x the half diagonal.
  double sphere_radius = 0.0;
  /// Bump height and standard deviation in pixels; sigma 0 selects width / 5.
  double bump_amplitude = 2.0;
  double bump_sigma = 0.0;
  /// Constant depth offset added to every scene.
  double offset = 0.0;
  AlbedoPattern albedo_pattern = AlbedoPattern::Constant;
  double albedo = 0.8;
  double albedo_secondary = 0.5;
};

struct Scene {
  DepthMap depth;
  AlbedoMap albedo;
};

inline SceneKind parse_scene_kind(const std::string& name) {
  if (name == "sphere-cap") return SceneKind::SphereCap;
  if (name == "gaussian-bump") return SceneKind::GaussianBump;
  if (name == "plane") return SceneKind::Plane;
  throw InputError("unknown scene kind '" + name + "' (expected sphere-cap, gaussian-bump or plane)");
}

inline std::string to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::SphereCap: return "sphere-cap";
    case SceneKind::GaussianBump: return "gaussian-bump";
    case SceneKind::Plane: return "plane";
  }
  return "unknown";
}

/// Distance from the grid centre to the farthest pixel touched by a
/// forward-difference stencil (one pixel beyond the last centre).
inline double scene_half_diagonal(const Grid& grid) {
  const double cu = 0.5 * static_cast<double>(grid.width() - 1);
  const double cv = 0.5 * static_cast<double>(grid.height() - 1);
  return std::hypot(cu + 1.0, cv + 1.0);
}

inline double default_sphere_radius(const Grid& grid) { return 1.5 * scene_half_diagonal(grid); }

/// Smooth synthetic ground truth with bounded depth gradient.
inline Scene make_scene(SceneKind kind, const Grid& grid, const SceneParams& params = {}) {
  if (params.albedo < 0.0 || params.albedo_secondary < 0.0) throw InputError("albedo must be non-negative");
  const Index n = grid.size();
  const double cu = 0.5 * static_cast<double>(grid.width() - 1);
  const double cv = 0.5 * static_cast<double>(grid.height() - 1);
  Vector z = Vector::Constant(n, params.offset);

  switch (kind) {
    case SceneKind::Plane: break;
    case SceneKind::SphereCap: {
      const double radius = params.sphere_radius > 0.0 ? params.sphere_radius : default_sphere_radius(grid);
      if (radius <= scene_half_diagonal(grid)) {
        throw InputError("sphere-cap radius must exceed the grid half diagonal (" +
                         std::to_string(scene_half_diagonal(grid)) + ")");
      }
      const double rim = std::sqrt(radius * radius - std::pow(scene_half_diagonal(grid), 2));
      for (Index v = 0; v < grid.height(); ++v) {
        for (Index u = 0; u < grid.width(); ++u) {
          const double du = static_cast<double>(u) - cu;
          const double dv = static_cast<double>(v) - cv;
          z(grid.index(u, v)) += std::sqrt(radius * radius - du * du - dv * dv) - rim;
        }
      }
      break;
    }
    case SceneKind::GaussianBump: {
      const double sigma = params.bump_sigma > 0.0 ? params.bump_sigma : static_cast<double>(grid.width()) / 5.0;
      if (params.bump_sigma < 0.0) throw InputError("gaussian-bump sigma must be positive");
      for (Index v = 0; v < grid.height(); ++v) {
        for (Index u = 0; u < grid.width(); ++u) {
          const double du = static_cast<double>(u) - cu;
          const double dv = static_cast<double>(v) - cv;
          z(grid.index(u, v)) += params.bump_amplitude * std::exp(-(du * du + dv * dv) / (2.0 * sigma * sigma));
        }
      }
      break;
    }
  }

  Vector rho = Vector::Constant(n, params.albedo);
  if (params.albedo_pattern == AlbedoPattern::TwoTone) {
    for (Index v = 0; v < grid.height(); ++v) {
      for (Index u = grid.width() / 2; u < grid.width(); ++u) rho(grid.index(u, v)) = params.albedo_secondary;
    }
  }
  return {DepthMap(grid, std::move(z)), AlbedoMap(grid, std::move(rho))};
}

/// Largest gradient magnitude of the continuous sphere cap over the region
/// reached by forward differences.
inline double sphere_cap_slope_bound(const Grid& grid, double radius) {
  const double r = scene_half_diagonal(grid);
  return r / std::sqrt(radius * radius - r * r);
}

/// m unit lights on a cone of half-angle `tilt` around the optical axis,
/// evenly spaced in azimuth. m >= 3 and tilt in (0, pi/2) give rank 3.
inline LightMatrix ring_lights(Index m, double tilt = 0.5, double phase = 0.0) {
  if (m < 1) throw InputError("ring_lights: need at least one light");
  LightMatrix::Storage s(m, 3);
  for (Index i = 0; i < m; ++i) {
    const double phi = phase + 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(m);
    s(i, 0) = std::sin(tilt) * std::cos(phi);
    s(i, 1) = std::sin(tilt) * std::sin(phi);
    s(i, 2) = std::cos(tilt);
  }
  return LightMatrix(std::move(s));
}

}  // namespace psdepth
