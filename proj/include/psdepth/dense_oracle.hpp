#pragma once

// Literal dense-matrix evaluation of the exact gradient. Every object is
// materialized (M, the block-diagonal A, the vectorized Jacobians D[A] and
// D[b], and the Kronecker factor) so the result is independent of the
// blockwise production code in energy.hpp. Sizes grow like m n^3, hence the
// pixel guard.

#include "psdepth/energy.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <string>

namespace psdepth {

inline constexpr Index kDenseOracleMaxPixels = 64;

/// Jacobian of a matrix-valued map in the vec convention: column k is
/// vec(dA/dx_k), with vec stacking columns. `partial(k)` must return the
/// rows x cols partial derivative with respect to x_k.
template <class Partial>
Matrix vec_jacobian(Partial&& partial, Index rows, Index cols, Index vars) {
  Matrix jac(rows * cols, vars);
  for (Index k = 0; k < vars; ++k) {
    const Matrix dk = partial(k);
    if (dk.rows() != rows || dk.cols() != cols) throw InputError("vec_jacobian: partial has wrong shape");
    jac.col(k) = dk.reshaped();
  }
  return jac;
}

/// (1/m) (A M + P)^T W (A M z - b) with P = ((Mz)^T kron I_mn) D[A] - D[b],
/// everything dense. W is the 0/1 data mask.
inline Vector dense_oracle_grad(const EnergyContext& ctx, const Vector& z) {
  const Index n = ctx.pixels();
  const Index m = ctx.count();
  if (n > kDenseOracleMaxPixels) {
    throw InputError("dense_oracle_grad: " + std::to_string(n) + " pixels exceeds the limit of " +
                     std::to_string(kDenseOracleMaxPixels));
  }
  require_size(z.size(), n, "dense_oracle_grad");

  const Matrix mat = Matrix(ctx.op.matrix());
  const Vector mz = mat * z;
  const Matrix sl = ctx.lights.left();
  const Vector sr = ctx.lights.right();

  // damp_j = 1/sqrt(1 + |M_j z|^2) and its partials d damp_j / d z_k.
  Vector damp(n);
  Matrix ddamp(n, n);
  for (Index j = 0; j < n; ++j) {
    const Eigen::Vector2d g = mz.segment<2>(2 * j);
    damp(j) = 1.0 / std::sqrt(1.0 + g.squaredNorm());
    const Matrix mj = mat.middleRows(2 * j, 2);
    ddamp.row(j) = -std::pow(damp(j), 3) * (mj.transpose() * g).transpose();
  }

  // A is mn x 2n block diagonal, b is the stacked mn vector.
  Matrix a = Matrix::Zero(m * n, 2 * n);
  Vector b(m * n);
  for (Index j = 0; j < n; ++j) {
    a.block(j * m, 2 * j, m, 2) = -ctx.albedo.rho(j) * damp(j) * sl;
    b.segment(j * m, m) = ctx.images.intensities.col(j) - ctx.albedo.rho(j) * damp(j) * sr;
  }

  const Matrix da = vec_jacobian(
      [&](Index k) {
        Matrix dk = Matrix::Zero(m * n, 2 * n);
        for (Index j = 0; j < n; ++j) dk.block(j * m, 2 * j, m, 2) = -ctx.albedo.rho(j) * ddamp(j, k) * sl;
        return dk;
      },
      m * n, 2 * n, n);
  const Matrix db = vec_jacobian(
      [&](Index k) {
        Matrix dk(m * n, 1);
        for (Index j = 0; j < n; ++j) dk.block(j * m, 0, m, 1) = -ctx.albedo.rho(j) * ddamp(j, k) * sr;
        return dk;
      },
      m * n, 1, n);

  const Matrix kron = Eigen::kroneckerProduct(Matrix(mz.transpose()), Matrix::Identity(m * n, m * n));
  const Matrix p = kron * da - db;

  Vector residual = a * mz - b;
  for (Index j = 0; j < n; ++j) residual.segment(j * m, m) *= ctx.weight(j);
  return (a * mat + p).transpose() * residual / static_cast<double>(m);
}

}  // namespace psdepth
