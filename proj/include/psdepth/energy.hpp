#pragma once

#include "psdepth/gradient_operator.hpp"
#include "psdepth/types.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace psdepth {

enum class GradientMode { Approx, Exact };

/// Everything the depth energy f(z) + g(z) needs besides z itself.
///
/// f(z) = (1/2m) sum_j w_j |A_j(z) M_j z - b_j(z)|^2 and
/// g(z) = (lambda/2) |z - z0|^2, where w_j is an optional 0/1 data mask.
struct EnergyContext {
  ImageStack images;
  LightMatrix lights;
  GradientOperator op;
  AlbedoMap albedo;
  double lambda = 1e-6;
  DepthMap prior;
  /// Per-pixel data weights (1 keeps, 0 drops the pixel). Empty means all ones.
  Vector mask;

  EnergyContext() = default;
  EnergyContext(ImageStack images_, LightMatrix lights_, GradientOperator op_, AlbedoMap albedo_,
                double lambda_, DepthMap prior_, Vector mask_ = {})
      : images(std::move(images_)),
        lights(std::move(lights_)),
        op(std::move(op_)),
        albedo(std::move(albedo_)),
        lambda(lambda_),
        prior(std::move(prior_)),
        mask(std::move(mask_)) {
    validate();
  }

  Index count() const { return images.count(); }
  Index pixels() const { return images.pixels(); }
  double weight(Index j) const { return mask.size() == 0 ? 1.0 : mask(j); }

  void validate() const {
    require_same_grid(images.grid, op.grid(), "EnergyContext images");
    require_same_grid(albedo.grid, op.grid(), "EnergyContext albedo");
    require_same_grid(prior.grid, op.grid(), "EnergyContext prior");
    if (images.count() != lights.count()) {
      throw InputError("EnergyContext: " + std::to_string(images.count()) + " images but " +
                       std::to_string(lights.count()) + " lights");
    }
    if (images.count() < 1) throw InputError("EnergyContext: no images");
    if (!(lambda >= 0.0)) throw InputError("EnergyContext: lambda must be non-negative");
    if (mask.size() != 0) require_size(mask.size(), pixels(), "EnergyContext mask");
  }
};

namespace detail {

// Shared per-pixel pass over the data term. For each pixel with weight w the
// residual r_j = R_j(z) - I_j = A_j M_j z - b_j is formed; the visitor
// receives the pixel index, the stacked gradient g = M_j z, the damping
// s = 1/sqrt(1 + |g|^2), the shading S [-g; 1] and the weighted residual.
template <class Visitor>
void for_each_pixel_residual(const EnergyContext& ctx, const Vector& z, std::vector<double>& shade,
                             std::vector<double>& residual, Visitor&& visit) {
  require_size(z.size(), ctx.pixels(), "energy: depth vector");
  const Index m = ctx.count();
  const Index n = ctx.pixels();
  const Vector grad = ctx.op.apply(z);
  const auto& s = ctx.lights.matrix();
  const double* intensity = ctx.images.intensities.data();
  shade.resize(static_cast<std::size_t>(m));
  residual.resize(static_cast<std::size_t>(m));
  for (Index j = 0; j < n; ++j) {
    const double w = ctx.weight(j);
    if (w == 0.0) continue;
    const double gu = grad(2 * j);
    const double gv = grad(2 * j + 1);
    const double damp = 1.0 / std::sqrt(1.0 + gu * gu + gv * gv);
    const double scale = ctx.albedo.rho(j) * damp;
    const double* ij = intensity + j * m;
    for (Index i = 0; i < m; ++i) {
      const double sh = -s(i, 0) * gu - s(i, 1) * gv + s(i, 2);
      shade[static_cast<std::size_t>(i)] = sh;
      residual[static_cast<std::size_t>(i)] = w * (scale * sh - ij[i]);
    }
    visit(j, gu, gv, damp, shade, residual);
  }
}

}  // namespace detail

/// Data term f(z) = (1/2m) |A(z) M z - b(z)|^2, evaluated blockwise.
inline double eval_f(const EnergyContext& ctx, const Vector& z) {
  std::vector<double> shade, residual;
  double sum = 0.0;
  detail::for_each_pixel_residual(ctx, z, shade, residual,
                                  [&](Index, double, double, double, const auto&, const auto& r) {
                                    for (double ri : r) sum += ri * ri;
                                  });
  return sum / (2.0 * static_cast<double>(ctx.count()));
}

inline double eval_g(const EnergyContext& ctx, const Vector& z) {
  require_size(z.size(), ctx.pixels(), "eval_g");
  return 0.5 * ctx.lambda * (z - ctx.prior.z).squaredNorm();
}

inline double eval_objective(const EnergyContext& ctx, const Vector& z) { return eval_f(ctx, z) + eval_g(ctx, z); }

/// Stacked residual vectors r_j = A_j M_j z - b_j as an m x n matrix.
inline Matrix residuals(const EnergyContext& ctx, const Vector& z) {
  Matrix out = Matrix::Zero(ctx.count(), ctx.pixels());
  std::vector<double> shade, residual;
  detail::for_each_pixel_residual(ctx, z, shade, residual,
                                  [&](Index j, double, double, double, const auto&, const auto& r) {
                                    for (Index i = 0; i < out.rows(); ++i) out(i, j) = r[static_cast<std::size_t>(i)];
                                  });
  return out;
}

/// Approximate gradient q = (1/m) (A M)^T (A M z - b), which treats A and b
/// as constant in z.
inline Vector grad_f_approx(const EnergyContext& ctx, const Vector& z) {
  const Index n = ctx.pixels();
  const auto& s = ctx.lights.matrix();
  Vector stacked = Vector::Zero(2 * n);
  std::vector<double> shade, residual;
  detail::for_each_pixel_residual(ctx, z, shade, residual,
                                  [&](Index j, double, double, double damp, const auto&, const auto& r) {
                                    // A_j^T r_j = -rho_j s_j S_l^T r_j
                                    double su = 0.0, sv = 0.0;
                                    for (std::size_t i = 0; i < r.size(); ++i) {
                                      su += s(static_cast<Index>(i), 0) * r[i];
                                      sv += s(static_cast<Index>(i), 1) * r[i];
                                    }
                                    const double a = -ctx.albedo.rho(j) * damp;
                                    stacked(2 * j) = a * su;
                                    stacked(2 * j + 1) = a * sv;
                                  });
  return ctx.op.apply_transpose(stacked) / static_cast<double>(ctx.count());
}

/// Exact gradient (1/m) (A M + p)^T (A M z - b). The p_j block is the dyad
/// -rho_j s_j^3 S[-M_j z; 1] (M_j^T M_j z)^T, so p_j^T r_j is routed through
/// M_j^T alongside A_j^T r_j.
inline Vector grad_f_exact(const EnergyContext& ctx, const Vector& z) {
  const Index n = ctx.pixels();
  const auto& s = ctx.lights.matrix();
  Vector stacked = Vector::Zero(2 * n);
  std::vector<double> shade, residual;
  detail::for_each_pixel_residual(
      ctx, z, shade, residual, [&](Index j, double gu, double gv, double damp, const auto& sh, const auto& r) {
        double su = 0.0, sv = 0.0, sr = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) {
          su += s(static_cast<Index>(i), 0) * r[i];
          sv += s(static_cast<Index>(i), 1) * r[i];
          sr += sh[i] * r[i];
        }
        const double rho = ctx.albedo.rho(j);
        const double a = -rho * damp;
        const double p = -rho * damp * damp * damp * sr;
        stacked(2 * j) = a * su + p * gu;
        stacked(2 * j + 1) = a * sv + p * gv;
      });
  return ctx.op.apply_transpose(stacked) / static_cast<double>(ctx.count());
}

inline Vector grad_f(const EnergyContext& ctx, const Vector& z, GradientMode mode) {
  return mode == GradientMode::Exact ? grad_f_exact(ctx, z) : grad_f_approx(ctx, z);
}

/// <q(z), grad f(z)>. Non-negative values certify -q as a descent direction.
inline double descent_diagnostic(const EnergyContext& ctx, const Vector& z) {
  return grad_f_approx(ctx, z).dot(grad_f_exact(ctx, z));
}

// ---------------------------------------------------------------------------
// Explicit per-pixel blocks. These materialize A_j, b_j and p_j for tests and
// diagnostics; the production path above never forms them.

/// A_j(z) = -rho_j / sqrt(1 + |M_j z|^2) S_l  (m x 2).
inline Matrix block_a(const EnergyContext& ctx, const Vector& z, Index j) {
  const Eigen::Vector2d g = ctx.op.pixel_gradient(z, j);
  return -ctx.albedo.rho(j) / std::sqrt(1.0 + g.squaredNorm()) * ctx.lights.left();
}

/// b_j(z) = I_j - rho_j / sqrt(1 + |M_j z|^2) S_r  (m).
inline Vector block_b(const EnergyContext& ctx, const Vector& z, Index j) {
  const Eigen::Vector2d g = ctx.op.pixel_gradient(z, j);
  return ctx.images.intensities.col(j) - ctx.albedo.rho(j) / std::sqrt(1.0 + g.squaredNorm()) * ctx.lights.right();
}

/// p_j(z) restricted to the column support of M_j. Returns the block
/// (m x |support|) and the support indices.
inline std::pair<Matrix, std::vector<Index>> block_p(const EnergyContext& ctx, const Vector& z, Index j) {
  const auto support = ctx.op.block_support(j);
  const Matrix mj = ctx.op.block_dense(j, support);
  const Eigen::Vector2d g = ctx.op.pixel_gradient(z, j);
  const double t = 1.0 + g.squaredNorm();
  const Eigen::Vector3d v(-g(0), -g(1), 1.0);
  const Vector column = -ctx.albedo.rho(j) / (t * std::sqrt(t)) * (ctx.lights.matrix() * v);
  const Vector row = mj.transpose() * g;  // (M_j^T M_j z) on the support
  return {column * row.transpose(), support};
}

}  // namespace psdepth
