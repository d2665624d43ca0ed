#pragma once

#include "psdepth/types.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <vector>

namespace psdepth {

/// Forward-difference gradient operator M (2n x n). Rows 2j and 2j+1 form
/// the block M_j with M_j z = (dz/du, dz/dv) at pixel j. At the last
/// column (row) the u (v) derivative row is zero, so M annihilates
/// constants and every block has at most four nonzeros. Unit spacing.
class GradientOperator {
 public:
  using Sparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  GradientOperator() = default;

  explicit GradientOperator(Grid grid) : grid_(grid) {
    const Index n = grid.size();
    const Index w = grid.width();
    const Index h = grid.height();
    std::vector<Eigen::Triplet<double>> entries;
    entries.reserve(static_cast<std::size_t>(4 * n));
    for (Index v = 0; v < h; ++v) {
      for (Index u = 0; u < w; ++u) {
        const Index j = grid.index(u, v);
        if (u + 1 < w) {
          entries.emplace_back(2 * j, j + 1, 1.0);
          entries.emplace_back(2 * j, j, -1.0);
        }
        if (v + 1 < h) {
          entries.emplace_back(2 * j + 1, j + w, 1.0);
          entries.emplace_back(2 * j + 1, j, -1.0);
        }
      }
    }
    m_.resize(2 * n, n);
    m_.setFromTriplets(entries.begin(), entries.end());
    m_.makeCompressed();
  }

  const Grid& grid() const { return grid_; }
  Index pixels() const { return grid_.size(); }
  const Sparse& matrix() const { return m_; }

  /// All per-pixel gradients stacked: (Mz)_{2j..2j+1} = M_j z.
  Vector apply(const Vector& z) const {
    require_size(z.size(), pixels(), "GradientOperator::apply");
    return m_ * z;
  }

  /// M^T w for a stacked 2n-vector w.
  Vector apply_transpose(const Vector& w) const {
    require_size(w.size(), 2 * pixels(), "GradientOperator::apply_transpose");
    return m_.transpose() * w;
  }

  Eigen::Vector2d pixel_gradient(const Vector& z, Index j) const {
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    for (int r = 0; r < 2; ++r) {
      for (Sparse::InnerIterator it(m_, 2 * j + r); it; ++it) g(r) += it.value() * z(it.col());
    }
    return g;
  }

  /// Column support of M_j (the pixels its stencil touches), sorted.
  std::vector<Index> block_support(Index j) const {
    std::vector<Index> cols;
    for (int r = 0; r < 2; ++r) {
      for (Sparse::InnerIterator it(m_, 2 * j + r); it; ++it) {
        if (std::find(cols.begin(), cols.end(), it.col()) == cols.end()) cols.push_back(it.col());
      }
    }
    std::sort(cols.begin(), cols.end());
    return cols;
  }

  /// M_j restricted to its column support (2 x |support|).
  Matrix block_dense(Index j, const std::vector<Index>& support) const {
    Matrix b = Matrix::Zero(2, static_cast<Index>(support.size()));
    for (int r = 0; r < 2; ++r) {
      for (Sparse::InnerIterator it(m_, 2 * j + r); it; ++it) {
        const auto pos = std::find(support.begin(), support.end(), it.col()) - support.begin();
        b(r, pos) = it.value();
      }
    }
    return b;
  }

  /// Spectral norm of the single block M_j, by SVD of its 2 x k support.
  double block_norm(Index j) const {
    const auto support = block_support(j);
    if (support.empty()) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(block_dense(j, support));
    return svd.singularValues()(0);
  }

  /// Spectral norm of M by power iteration on M^T M.
  double norm(double tol = 1e-10, int max_iters = 100000) const {
    const Index n = pixels();
    if (m_.nonZeros() == 0) return 0.0;
    // Deterministic start vector with components along every eigenvector.
    Vector x(n);
    for (Index i = 0; i < n; ++i) x(i) = std::cos(0.7 * static_cast<double>(i) + 0.3) + 1.5;
    x.normalize();
    double sigma2 = 0.0;
    for (int it = 0; it < max_iters; ++it) {
      Vector y = m_.transpose() * (m_ * x);
      const double next = x.dot(y);
      const double ny = y.norm();
      if (ny == 0.0) return 0.0;
      x = y / ny;
      if (std::abs(next - sigma2) <= tol * next) {
        sigma2 = next;
        break;
      }
      sigma2 = next;
    }
    return std::sqrt(sigma2);
  }

 private:
  Grid grid_;
  Sparse m_;
};

inline GradientOperator build_gradient_operator(const Grid& grid) { return GradientOperator(grid); }

}  // namespace psdepth
