#pragma once

#include "psdepth/energy.hpp"

#include <algorithm>

namespace psdepth {

/// Central differences (f(z + h e_k) - f(z - h e_k)) / 2h of eval_f.
inline Vector finite_difference_gradient(const EnergyContext& ctx, const Vector& z, double h = 1e-6) {
  Vector out(z.size());
  Vector probe = z;
  for (Index k = 0; k < z.size(); ++k) {
    probe(k) = z(k) + h;
    const double up = eval_f(ctx, probe);
    probe(k) = z(k) - h;
    const double down = eval_f(ctx, probe);
    probe(k) = z(k);
    out(k) = (up - down) / (2.0 * h);
  }
  return out;
}

/// |a - ref|_inf / |ref|_inf, or the absolute error when ref is zero.
inline double relative_linf(const Vector& a, const Vector& ref) {
  const double diff = (a - ref).lpNorm<Eigen::Infinity>();
  const double scale = ref.lpNorm<Eigen::Infinity>();
  return scale > 0.0 ? diff / scale : diff;
}

}  // namespace psdepth
