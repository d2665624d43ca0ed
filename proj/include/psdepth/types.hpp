#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <utility>
#include <stdexcept>
#include <string>

namespace psdepth {

/// Malformed or inconsistent input (bad dimensions, rank-deficient lights, ...).
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure inside a solver (non-convergence, divergence).
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Rectangular pixel grid. Pixel j = v * width + u, with u the column
/// (horizontal) and v the row (vertical) coordinate.
class Grid {
 public:
  Grid() = default;
  Grid(Index width, Index height) : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw InputError("grid dimensions must be positive, got " +
                       std::to_string(width) + "x" + std::to_string(height));
    }
  }

  Index width() const { return width_; }
  Index height() const { return height_; }
  Index size() const { return width_ * height_; }
  Index index(Index u, Index v) const { return v * width_ + u; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  Index width_ = 1;
  Index height_ = 1;
};

inline void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (a != b) {
    throw InputError(std::string(what) + ": grid mismatch (" +
                     std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                     " vs " + std::to_string(b.width()) + "x" +
                     std::to_string(b.height()) + ")");
  }
}

inline void require_size(Index actual, Index expected, const char* what) {
  if (actual != expected) {
    throw InputError(std::string(what) + ": expected " + std::to_string(expected) +
                     " entries, got " + std::to_string(actual));
  }
}

/// m images over a grid. Column j of `intensities` is the per-pixel
/// intensity vector I_j (length m).
struct ImageStack {
  Grid grid;
  Matrix intensities;  // m x n

  ImageStack() = default;
  ImageStack(Grid g, Matrix values) : grid(g), intensities(std::move(values)) {
    require_size(intensities.cols(), grid.size(), "ImageStack");
    if (!intensities.allFinite()) throw InputError("ImageStack: non-finite intensity");
  }

  Index count() const { return intensities.rows(); }
  Index pixels() const { return grid.size(); }
};

/// Stacked lighting directions S (m x 3), one row per image.
class LightMatrix {
 public:
  using Storage = Eigen::Matrix<double, Eigen::Dynamic, 3>;

  LightMatrix() = default;
  explicit LightMatrix(Storage s) : s_(std::move(s)) {
    if (!s_.allFinite()) throw InputError("LightMatrix: non-finite entry");
  }

  const Storage& matrix() const { return s_; }
  Index count() const { return s_.rows(); }
  /// S_l, the m x 2 block acting on the depth gradient.
  auto left() const { return s_.leftCols<2>(); }
  /// S_r, the m x 1 column acting on the constant component.
  auto right() const { return s_.col(2); }

  Index rank(double tol = 1e-10) const {
    if (s_.rows() == 0) return 0;
    Eigen::JacobiSVD<Storage> svd(s_);
    const auto& sv = svd.singularValues();
    Index r = 0;
    for (Index i = 0; i < sv.size(); ++i) {
      if (sv(i) > tol * sv(0)) ++r;
    }
    return r;
  }

  /// Throws unless there are at least three non-coplanar lights.
  void require_full_rank() const {
    if (s_.rows() < 3) {
      throw InputError("at least 3 lights required, got " + std::to_string(s_.rows()));
    }
    if (rank() < 3) throw InputError("lighting directions are coplanar (rank(S) < 3)");
  }

 private:
  Storage s_;
};

struct DepthMap {
  Grid grid;
  Vector z;

  DepthMap() = default;
  DepthMap(Grid g, Vector values) : grid(g), z(std::move(values)) {
    require_size(z.size(), grid.size(), "DepthMap");
    if (!z.allFinite()) throw InputError("DepthMap: non-finite depth");
  }
};

/// Per-pixel albedo. Values are expected in [0,1] but not clamped.
struct AlbedoMap {
  Grid grid;
  Vector rho;

  AlbedoMap() = default;
  AlbedoMap(Grid g, Vector values) : grid(g), rho(std::move(values)) {
    require_size(rho.size(), grid.size(), "AlbedoMap");
    if (!rho.allFinite()) throw InputError("AlbedoMap: non-finite albedo");
  }

  static AlbedoMap constant(Grid g, double value) {
    return {g, Vector::Constant(g.size(), value)};
  }
};

/// Unit normals, one row per pixel, third component positive.
struct NormalField {
  using Storage = Eigen::Matrix<double, Eigen::Dynamic, 3>;

  Grid grid;
  Storage normals;

  NormalField() = default;
  NormalField(Grid g, Storage values) : grid(g), normals(std::move(values)) {
    require_size(normals.rows(), grid.size(), "NormalField");
    if (!normals.allFinite()) throw InputError("NormalField: non-finite normal");
  }

  static NormalField constant(Grid g, const Eigen::Vector3d& n) {
    Storage s(g.size(), 3);
    s.rowwise() = n.normalized().transpose();
    return {g, std::move(s)};
  }
};

}  // namespace psdepth
