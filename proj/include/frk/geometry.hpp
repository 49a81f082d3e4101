#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace frk {

using SpMat = Eigen::SparseMatrix<double>;
using SpMatRow = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Axis-aligned closed rectangle.
struct Rect {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
  Point centre() const { return {0.5 * (xmin + xmax), 0.5 * (ymin + ymax)}; }
  bool intersects(const Rect& o) const {
    return xmin <= o.xmax && o.xmin <= xmax && ymin <= o.ymax && o.ymin <= ymax;
  }
  bool contains(const Point& p) const {
    return xmin <= p.x && p.x <= xmax && ymin <= p.y && p.y <= ymax;
  }
};

/// Explicit list of BAU indices (0-based), bypassing geometric mapping.
struct BauList {
  std::vector<int> ids;
};

/// An observation footprint or prediction region. `time` selects one time bin;
/// when absent on a spatio-temporal grid the support spans every time bin.
struct Support {
  std::variant<Point, Rect, BauList> shape;
  std::optional<int> time;
};

/// Regular rectangular discretisation of the domain into basic areal units.
///
/// Spatial cells are numbered in raster order: row 0 is the top row (largest y),
/// columns run left to right. BAU index = time * n_spatial + spatial, so the
/// spatial index runs fastest.
class BauGrid {
 public:
  BauGrid(const Rect& bbox, int nx, int ny, int time_bins);

  const Rect& bbox() const { return bbox_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int n_spatial() const { return nx_ * ny_; }
  int n_time() const { return n_time_; }
  int size() const { return n_spatial() * n_time_; }

  int index(int spatial, int time) const { return time * n_spatial() + spatial; }
  int spatial_of(int bau) const { return bau % n_spatial(); }
  int time_of(int bau) const { return bau / n_spatial(); }

  const Rect& cell(int spatial) const { return cells_[static_cast<std::size_t>(spatial)]; }
  Point centroid(int bau) const { return cell(spatial_of(bau)).centre(); }

  /// Rows of the covariate design T; defaults to a single intercept column.
  const Eigen::MatrixXd& covariates() const { return covariates_; }
  const Eigen::VectorXd& rel_weights() const { return rel_weights_; }
  const Eigen::VectorXd& fs_scale() const { return fs_scale_; }
  const std::optional<Eigen::VectorXd>& size_params() const { return size_params_; }

  void set_covariates(Eigen::MatrixXd t);
  void set_rel_weights(Eigen::VectorXd v);
  void set_fs_scale(Eigen::VectorXd v);
  void set_size_params(Eigen::VectorXd k);

  /// Spatial cells whose closed extent meets the closed rectangle.
  std::vector<int> spatial_cells_meeting(const Rect& r) const;

 private:
  Rect bbox_;
  int nx_;
  int ny_;
  int n_time_;
  std::vector<Rect> cells_;
  Eigen::MatrixXd covariates_;
  Eigen::VectorXd rel_weights_;
  Eigen::VectorXd fs_scale_;
  std::optional<Eigen::VectorXd> size_params_;
};

BauGrid build_bau_grid(const Rect& bbox, int nx, int ny, int time_bins);

enum class SupportKind { observation, prediction };

struct SupportSet {
  std::vector<Support> geometries;
  std::vector<std::vector<int>> bau_index_sets;  // sorted, non-empty
  SupportKind kind = SupportKind::observation;

  std::size_t size() const { return bau_index_sets.size(); }
};

/// c_j = { i : A_i ∩ R_j ≠ ∅ } under closed-set semantics.
SupportSet map_supports(const BauGrid& grid, std::span<const Support> geoms,
                        SupportKind kind = SupportKind::observation);

struct IncidenceMatrix {
  SpMatRow weights;  // rows = supports, cols = BAUs
  bool normalised = false;
};

/// Weighted sum (or average, when `normalise`) of BAUs over each support.
/// `force_unit_sum` gives unit weights and ignores `normalise`.
IncidenceMatrix build_incidence(const BauGrid& grid, const SupportSet& supports, bool normalise,
                                bool force_unit_sum);

}  // namespace frk
