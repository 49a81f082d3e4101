#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "frk/geometry.hpp"

namespace frk {

/// One local bisquare function. `row`/`col` locate it on its resolution's
/// lattice when the basis is regular (-1 otherwise).
struct BasisFunction {
  Point centre;
  double aperture = 0.0;
  int resolution = 1;
  int row = -1;
  int col = -1;
};

/// Multiresolution basis. A non-empty `temporal` factor turns the set into a
/// tensor product whose function index is `t * n_spatial() + s` (time slow).
struct BasisSet {
  std::vector<BasisFunction> functions;
  int n_res = 0;
  std::vector<double> mindist;     // per resolution, 0-based
  std::vector<int> lattice_cols;   // per resolution, when regular
  std::vector<int> lattice_rows;
  bool regular = false;
  std::vector<BasisFunction> temporal;

  int n_spatial() const { return static_cast<int>(functions.size()); }
  int n_temporal() const { return temporal.empty() ? 1 : static_cast<int>(temporal.size()); }
  int size() const { return n_spatial() * n_temporal(); }
  bool is_tensor() const { return !temporal.empty(); }

  /// Indices of spatial functions at resolution k (1-based).
  std::vector<int> resolution_members(int k) const;
};

inline double bisquare(double d, double aperture) {
  if (d >= aperture) return 0.0;
  const double u = d / aperture;
  const double w = 1.0 - u * u;
  return w * w;
}

/// Resolution k holds a ceil(3 * 2^(k-1))-per-side lattice whose outer nodes sit on
/// the bbox edges; aperture is 1.5 lattice spacings, so every function's support
/// reaches at least one aperture past the lattice.
BasisSet auto_basis(const Rect& bbox, int n_res);

/// r_t evenly spaced bisquare functions on [t0, t1].
BasisSet temporal_basis(double t0, double t1, int r_t);

BasisSet tensor_basis(const BasisSet& spatial, const BasisSet& temporal);

/// Design matrix (|points| x r) of a spatial-only basis.
SpMat eval_basis(const BasisSet& basis, std::span<const Point> points);

/// Design matrix of a tensor basis at space-time coordinates.
SpMat eval_basis(const BasisSet& basis, std::span<const Point> points, std::span<const double> times);

/// S evaluated at every BAU centroid (time coordinate = time bin index).
SpMat bau_design(const BasisSet& basis, const BauGrid& grid);

void write_basis_csv(std::ostream& os, const BasisSet& basis);
BasisSet read_basis_csv(std::istream& is);

}  // namespace frk
