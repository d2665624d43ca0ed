#pragma once

#include "psdepth/energy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace psdepth {

enum class BetaMode { Adaptive, Constant };

struct SolverConfig {
  double lambda = 1e-6;
  double c = 0.01;
  double d = 1.0;
  double eta = 1.2;
  double mu = 1.05;
  BetaMode beta_mode = BetaMode::Adaptive;
  double beta_constant = 0.5;
  GradientMode gradient_mode = GradientMode::Approx;
  int inner_max_iters = 100;
  int outer_max_iters = 500;
  double rel_tol = 1e-8;
  double L_init = 1.0;
  /// Evaluate <q, grad f> at every inner iteration (costs one exact gradient).
  bool record_descent = false;

  void validate() const {
    if (!(c > 0.0)) throw InputError("config: c must be positive");
    if (!(d > c)) throw InputError("config: d must exceed c");
    if (!(eta > 1.0)) throw InputError("config: eta must exceed 1");
    if (!(mu >= 1.0)) throw InputError("config: mu must be at least 1");
    if (!(lambda >= 0.0)) throw InputError("config: lambda must be non-negative");
    if (!(beta_constant >= 0.0 && beta_constant < 1.0)) throw InputError("config: beta_constant must lie in [0, 1)");
    if (inner_max_iters < 1 || outer_max_iters < 1) throw InputError("config: iteration limits must be positive");
    if (!(rel_tol > 0.0)) throw InputError("config: rel_tol must be positive");
    if (!(L_init > 0.0) || !std::isfinite(L_init)) throw InputError("config: L_init must be positive");
  }
};

/// One accepted inner step, taking z^(l) to z^(l+1). `Delta` is
/// |z^(l+1) - z^(l)|^2 and `H_delta` = (f+g)(z^(l+1)) + delta * Delta.
/// `H_prev` and `Delta_prev` are the same quantities one step earlier (for
/// l = 0, the start value of the inner loop and 0), so the descent property
/// reads H_delta <= H_prev - gamma * Delta_prev.
struct InnerRecord {
  int k = 0;
  int ell = 0;
  double f_plus_g = 0.0;
  double L = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double delta = 0.0;
  double gamma = 0.0;
  double Delta = 0.0;
  double H_delta = 0.0;
  double H_prev = 0.0;
  double Delta_prev = 0.0;
  /// rhs - lhs of the accepted backtracking inequality.
  double bt_slack = 0.0;
  int backtracks = 0;
  std::optional<double> q_dot_gradf;
};

struct OuterRecord {
  int k = 0;
  /// f + g after the albedo update of outer iteration k.
  double objective = 0.0;
  int inner_iterations = 0;
  /// Albedo values outside [0, 1] after the update (reported, not clamped).
  Index albedo_out_of_range = 0;
};

struct IterTrace {
  double initial_objective = 0.0;
  std::vector<InnerRecord> inner;
  std::vector<OuterRecord> outer;
};

/// Observes every accepted step: (context, z^(l), z^(l+1), accepted L).
using StepObserver = std::function<void(const EnergyContext&, const Vector&, const Vector&, double)>;

/// prox of alpha * (lambda/2)|x - z0|^2, the minimizer of
/// 1/2 |x - v|^2 + alpha lambda/2 |x - z0|^2.
inline Vector prox_g(const Vector& v, double alpha, double lambda, const Vector& z0) {
  if (!(alpha > 0.0)) throw InputError("prox_g: alpha must be positive");
  require_size(z0.size(), v.size(), "prox_g");
  const double t = alpha * lambda;
  // Same as (v + t z0) / (1 + t), written so that v = z0 is returned exactly.
  return v + (t / (1.0 + t)) * (z0 - v);
}

/// Step parameters of one iPiano iteration for a given L.
struct StepParams {
  double alpha = 0.0;
  double beta = 0.0;
  double delta = 0.0;
  double gamma = 0.0;
};

/// alpha from the beta rule, then delta = 1/alpha - L/2 - beta/(2 alpha)
/// and gamma = 1/alpha - L/2 - beta/alpha. With the adaptive beta rule and
/// alpha = (1 - beta)/(c + L/2) this gives gamma = c and a nonincreasing
/// delta sequence bounded below by c.
inline StepParams step_parameters(double L, double delta_prev, const SolverConfig& config) {
  StepParams p;
  if (config.beta_mode == BetaMode::Adaptive) {
    const double nu = (delta_prev + L / 2.0) / (config.c + L / 2.0);
    p.beta = (nu - 1.0) / (nu + config.c - 0.5);
  } else {
    p.beta = config.beta_constant;
  }
  p.alpha = (1.0 - p.beta) / (config.c + L / 2.0);
  p.delta = 1.0 / p.alpha - L / 2.0 - p.beta / (2.0 * p.alpha);
  p.gamma = 1.0 / p.alpha - L / 2.0 - p.beta / p.alpha;
  return p;
}

struct BacktrackResult {
  double L = 0.0;
  Vector z_next;
  double f_next = 0.0;
  /// rhs - lhs of the accepted inequality (>= 0 up to round-off).
  double slack = 0.0;
  int increases = 0;
};

inline constexpr double kBacktrackingLimit = 1e30;

/// Lazy backtracking given f(z) and the gradient G used for the step.
/// Builds candidates with `build(L)` and multiplies L by eta until
/// f(z+) <= f(z) + <G, z+ - z> + (L/2)|z+ - z|^2.
template <class Builder>
BacktrackResult lazy_backtracking(const EnergyContext& ctx, const Vector& z, double f_z, const Vector& grad_z,
                                  Builder&& build, double L_start, double eta) {
  if (!(L_start > 0.0)) throw InputError("lazy_backtracking: L_start must be positive");
  if (!(eta > 1.0)) throw InputError("lazy_backtracking: eta must exceed 1");
  // Accept round-off of a few ulps of f(z) in the comparison.
  const double allowance = 8.0 * std::numeric_limits<double>::epsilon() * std::abs(f_z);
  BacktrackResult out;
  double L = L_start;
  for (;;) {
    Vector candidate = build(L);
    const Vector step = candidate - z;
    const double f_next = eval_f(ctx, candidate);
    const double rhs = f_z + grad_z.dot(step) + 0.5 * L * step.squaredNorm();
    if (std::isfinite(f_next) && f_next <= rhs + allowance) {
      out.L = L;
      out.z_next = std::move(candidate);
      out.f_next = f_next;
      out.slack = rhs - f_next;
      return out;
    }
    L *= eta;
    ++out.increases;
    if (L > kBacktrackingLimit) {
      throw SolverError("lazy backtracking diverged: L exceeded 1e30 (the gradient is inconsistent with f)");
    }
  }
}

/// Convenience form that evaluates f and the selected gradient at z.
template <class Builder>
std::pair<double, Vector> lazy_backtracking(const EnergyContext& ctx, const Vector& z, Builder&& build,
                                            double L_start, double eta, GradientMode mode = GradientMode::Approx) {
  auto r = lazy_backtracking(ctx, z, eval_f(ctx, z), grad_f(ctx, z, mode), std::forward<Builder>(build), L_start,
                             eta);
  return {r.L, std::move(r.z_next)};
}

namespace detail {

/// Relative change test that also accepts two values at the round-off floor.
inline bool converged(double before, double after, double rel_tol, double floor) {
  const double scale = std::max(std::abs(before), std::abs(after));
  return std::abs(after - before) <= rel_tol * scale || scale <= floor;
}

/// Objective values below this are indistinguishable from zero: round-off in
/// each residual entry is a few ulps of the intensities.
inline double objective_floor(const EnergyContext& ctx) {
  const double eps = std::numeric_limits<double>::epsilon();
  return 16.0 * eps * eps * ctx.images.intensities.squaredNorm() / (2.0 * static_cast<double>(ctx.count()));
}

}  // namespace detail

struct InnerResult {
  DepthMap depth;
  /// L / mu of the last accepted step, the start value for the next loop.
  double next_L = 1.0;
  int iterations = 0;
};

/// The inner iPiano loop on f + g with fixed albedo. Appends one record per
/// iteration to `trace`, tagged with outer index `k`.
inline InnerResult ipiano_inner(const EnergyContext& ctx, const DepthMap& z_init, const SolverConfig& config,
                                IterTrace& trace, int k = 0, double L_start = 0.0,
                                const StepObserver& observer = {}) {
  config.validate();
  require_same_grid(z_init.grid, ctx.op.grid(), "ipiano_inner");
  const Vector& z0 = ctx.prior.z;
  const double floor = detail::objective_floor(ctx);

  Vector z = z_init.z;
  Vector z_prev = z;
  double delta_prev = config.d;
  double L = L_start > 0.0 ? L_start : config.L_init;
  double f_z = eval_f(ctx, z);
  double F = f_z + eval_g(ctx, z);
  double H_prev = F;
  double Delta_prev = 0.0;

  int ell = 0;
  for (; ell < config.inner_max_iters;) {
    const Vector grad = grad_f(ctx, z, config.gradient_mode);
    const Vector inertia = z - z_prev;
    auto build = [&](double trial_L) {
      const StepParams p = step_parameters(trial_L, delta_prev, config);
      return prox_g(z - p.alpha * grad + p.beta * inertia, p.alpha, ctx.lambda, z0);
    };
    BacktrackResult bt = lazy_backtracking(ctx, z, f_z, grad, build, L, config.eta);
    const StepParams p = step_parameters(bt.L, delta_prev, config);
    if (observer) observer(ctx, z, bt.z_next, bt.L);

    InnerRecord rec;
    rec.k = k;
    rec.ell = ell;
    rec.L = bt.L;
    rec.alpha = p.alpha;
    rec.beta = p.beta;
    rec.delta = p.delta;
    rec.gamma = p.gamma;
    rec.Delta = (bt.z_next - z).squaredNorm();
    rec.f_plus_g = bt.f_next + eval_g(ctx, bt.z_next);
    rec.H_delta = rec.f_plus_g + p.delta * rec.Delta;
    rec.H_prev = H_prev;
    rec.Delta_prev = Delta_prev;
    rec.bt_slack = bt.slack;
    rec.backtracks = bt.increases;
    if (config.record_descent) rec.q_dot_gradf = descent_diagnostic(ctx, z);
    trace.inner.push_back(rec);

    const double F_prev = F;
    z_prev = std::move(z);
    z = std::move(bt.z_next);
    f_z = bt.f_next;
    F = rec.f_plus_g;
    H_prev = rec.H_delta;
    Delta_prev = rec.Delta;
    delta_prev = p.delta;
    L = bt.L / config.mu;
    ++ell;
    if (detail::converged(F_prev, F, config.rel_tol, floor)) break;
  }
  return {DepthMap(z_init.grid, std::move(z)), L, ell};
}

/// Closed-form minimizer of f over rho with z fixed. Pixels with a vanishing
/// denominator, or excluded by `mask`, keep their previous value.
inline AlbedoMap albedo_update(const DepthMap& z, const ImageStack& images, const LightMatrix& lights,
                               const GradientOperator& op, const AlbedoMap& rho_prev, const Vector& mask = {}) {
  require_same_grid(z.grid, op.grid(), "albedo_update");
  require_same_grid(images.grid, op.grid(), "albedo_update");
  require_same_grid(rho_prev.grid, op.grid(), "albedo_update");
  if (images.count() != lights.count()) throw InputError("albedo_update: image/light count mismatch");
  if (mask.size() != 0) require_size(mask.size(), op.pixels(), "albedo_update mask");

  const Vector g = op.apply(z.z);
  const auto& s = lights.matrix();
  const Index m = images.count();
  Vector rho = rho_prev.rho;
  for (Index j = 0; j < op.pixels(); ++j) {
    if (mask.size() != 0 && mask(j) == 0.0) continue;
    const double gu = g(2 * j);
    const double gv = g(2 * j + 1);
    double num = 0.0, den = 0.0;
    for (Index i = 0; i < m; ++i) {
      const double sh = -s(i, 0) * gu - s(i, 1) * gv + s(i, 2);
      num += images.intensities(i, j) * sh;
      den += sh * sh;
    }
    if (den < 1e-12) continue;
    rho(j) = std::sqrt(1.0 + gu * gu + gv * gv) * num / den;
  }
  return {rho_prev.grid, std::move(rho)};
}

inline Index count_albedo_out_of_range(const AlbedoMap& rho) {
  return (rho.rho.array() < 0.0 || rho.rho.array() > 1.0).count();
}

struct SolveResult {
  DepthMap depth;
  AlbedoMap albedo;
  IterTrace trace;
};

/// Alternating minimization: iPiano on z with rho fixed, then the closed-form
/// rho update, until the post-update objective settles.
inline SolveResult alternating_solve(const ImageStack& images, const LightMatrix& lights, const DepthMap& z0,
                                     const AlbedoMap& rho0, const SolverConfig& config, const Vector& mask = {},
                                     const StepObserver& observer = {}) {
  config.validate();
  lights.require_full_rank();
  GradientOperator op(images.grid);
  EnergyContext ctx(images, lights, op, rho0, config.lambda, z0, mask);
  const double floor = detail::objective_floor(ctx);

  SolveResult out{z0, rho0, {}};
  double F = eval_objective(ctx, z0.z);
  out.trace.initial_objective = F;
  double L = config.L_init;
  for (int k = 0; k < config.outer_max_iters; ++k) {
    InnerResult inner = ipiano_inner(ctx, out.depth, config, out.trace, k, L, observer);
    L = inner.next_L;
    out.depth = std::move(inner.depth);
    out.albedo = albedo_update(out.depth, images, lights, ctx.op, out.albedo, ctx.mask);
    ctx.albedo = out.albedo;

    const double F_next = eval_objective(ctx, out.depth.z);
    out.trace.outer.push_back({k, F_next, inner.iterations, count_albedo_out_of_range(out.albedo)});
    const bool done = detail::converged(F, F_next, config.rel_tol, floor);
    F = F_next;
    if (done) break;
  }
  return out;
}

}  // namespace psdepth
