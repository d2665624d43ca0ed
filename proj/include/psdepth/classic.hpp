#pragma once

#include "psdepth/gradient_operator.hpp"
#include "psdepth/types.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <cmath>
#include <string>

namespace psdepth {

/// Pointwise least-squares photometric stereo output.
struct PointwisePSResult {
  NormalField normals;
  AlbedoMap albedo;
  Vector residual;  // |I_j - S m_j| per pixel
};

/// Albedo magnitudes at or below this are treated as dark pixels.
inline constexpr double kDarkAlbedo = 1e-12;

/// Per pixel solve (S^T S) m_j = S^T I_j, then rho_j = |m_j|, n_j = m_j / rho_j.
/// Dark pixels get rho_j = 0 and n_j = [0, 0, 1].
inline PointwisePSResult estimate_normals_albedo(const ImageStack& images, const LightMatrix& lights) {
  if (images.count() != lights.count()) {
    throw InputError("estimate_normals_albedo: " + std::to_string(images.count()) + " images but " +
                     std::to_string(lights.count()) + " lights");
  }
  lights.require_full_rank();
  const auto& s = lights.matrix();
  const Eigen::Matrix3d gram = s.transpose() * s;
  const Eigen::LDLT<Eigen::Matrix3d> normal_eq(gram);
  if (normal_eq.info() != Eigen::Success || !normal_eq.isPositive()) {
    throw InputError("estimate_normals_albedo: S^T S is singular");
  }

  const Index n = images.pixels();
  const Matrix rhs = s.transpose() * images.intensities;  // 3 x n
  const Matrix m = normal_eq.solve(rhs);                  // 3 x n
  const Matrix fit = s * m;

  NormalField::Storage normals(n, 3);
  Vector rho(n);
  Vector residual = (images.intensities - fit).colwise().norm().transpose();
  for (Index j = 0; j < n; ++j) {
    const double len = m.col(j).norm();
    if (len > kDarkAlbedo) {
      rho(j) = len;
      normals.row(j) = m.col(j).transpose() / len;
    } else {
      rho(j) = 0.0;
      normals.row(j) << 0.0, 0.0, 1.0;
    }
  }
  return {NormalField(images.grid, std::move(normals)), AlbedoMap(images.grid, std::move(rho)),
          std::move(residual)};
}

struct IntegrationOptions {
  double tolerance = 1e-10;
  /// Iteration cap as a multiple of the pixel count.
  Index max_iterations_per_pixel = 10;
};

/// Least-squares integration: min_z |M z - p|^2 with p_j = [-n1/n3, -n2/n3],
/// solved by conjugate gradients on M^T M z = M^T p, anchored at mean(z) = 0.
inline DepthMap integrate_normals(const NormalField& normals, const GradientOperator& op,
                                  const IntegrationOptions& options = {}) {
  require_same_grid(normals.grid, op.grid(), "integrate_normals");
  const Index n = normals.grid.size();
  Vector p(2 * n);
  for (Index j = 0; j < n; ++j) {
    const double n3 = normals.normals(j, 2);
    if (!(n3 > 0.0)) throw InputError("integrate_normals: normal with non-positive third component at pixel " + std::to_string(j));
    p(2 * j) = -normals.normals(j, 0) / n3;
    p(2 * j + 1) = -normals.normals(j, 1) / n3;
  }

  const Eigen::SparseMatrix<double> mt = op.matrix().transpose();
  const Eigen::SparseMatrix<double> normal_matrix = mt * op.matrix();
  const Vector rhs = mt * p;
  if (rhs.norm() == 0.0) return {normals.grid, Vector::Zero(n)};

  // Identity preconditioning keeps the iterates in range(M^T M), i.e. zero mean.
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper, Eigen::IdentityPreconditioner> cg;
  cg.setTolerance(options.tolerance);
  cg.setMaxIterations(options.max_iterations_per_pixel * n);
  cg.compute(normal_matrix);
  Vector z = cg.solve(rhs);
  if (cg.info() != Eigen::Success) {
    throw SolverError("integrate_normals: conjugate gradient did not converge after " +
                      std::to_string(cg.iterations()) + " iterations (relative residual " +
                      std::to_string(cg.error()) + ")");
  }
  z.array() -= z.mean();
  return {normals.grid, std::move(z)};
}

}  // namespace psdepth
