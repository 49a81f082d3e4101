#include "frk/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "frk/error.hpp"

namespace frk {

BauGrid::BauGrid(const Rect& bbox, int nx, int ny, int time_bins)
    : bbox_(bbox), nx_(nx), ny_(ny), n_time_(time_bins) {
  if (nx < 1 || ny < 1 || time_bins < 1) {
    throw config_error("grid: nx, ny and time_bins must all be >= 1");
  }
  if (!(bbox.width() > 0.0) || !(bbox.height() > 0.0) || !std::isfinite(bbox.area())) {
    throw geometry_error("grid: bounding box is degenerate (zero or negative width/height)");
  }
  // Edges are computed once per grid line so neighbouring cells share them exactly.
  std::vector<double> xs(static_cast<std::size_t>(nx) + 1);
  std::vector<double> ys(static_cast<std::size_t>(ny) + 1);
  for (int i = 0; i <= nx; ++i) xs[i] = bbox.xmin + bbox.width() * i / nx;
  for (int j = 0; j <= ny; ++j) ys[j] = bbox.ymax - bbox.height() * j / ny;
  xs[nx] = bbox.xmax;
  ys[ny] = bbox.ymin;
  cells_.reserve(static_cast<std::size_t>(nx) * ny);
  for (int row = 0; row < ny; ++row) {
    for (int col = 0; col < nx; ++col) {
      cells_.push_back({xs[col], ys[row + 1], xs[col + 1], ys[row]});
    }
  }
  const int n = size();
  covariates_ = Eigen::MatrixXd::Ones(n, 1);
  rel_weights_ = Eigen::VectorXd::Ones(n);
  fs_scale_ = Eigen::VectorXd::Ones(n);
}

void BauGrid::set_covariates(Eigen::MatrixXd t) {
  if (t.rows() != size()) throw config_error("grid: covariate rows must equal the number of BAUs");
  covariates_ = std::move(t);
}

void BauGrid::set_rel_weights(Eigen::VectorXd v) {
  if (v.size() != size()) throw config_error("grid: weight vector length must equal the number of BAUs");
  if ((v.array() <= 0.0).any()) throw domain_error("grid: relative BAU weights must be strictly positive");
  rel_weights_ = std::move(v);
}

void BauGrid::set_fs_scale(Eigen::VectorXd v) {
  if (v.size() != size()) throw config_error("grid: fine-scale scale vector length must equal the number of BAUs");
  if ((v.array() <= 0.0).any()) throw domain_error("grid: fine-scale scale entries must be strictly positive");
  fs_scale_ = std::move(v);
}

void BauGrid::set_size_params(Eigen::VectorXd k) {
  if (k.size() != size()) throw config_error("grid: size-parameter vector length must equal the number of BAUs");
  if ((k.array() < 0.0).any()) throw domain_error("grid: size parameters must be >= 0");
  size_params_ = std::move(k);
}

std::vector<int> BauGrid::spatial_cells_meeting(const Rect& r) const {
  std::vector<int> out;
  const double dx = bbox_.width() / nx_;
  const double dy = bbox_.height() / ny_;
  // Loose index window, then the exact closed-set predicate on stored edges.
  const int c0 = std::max(0, static_cast<int>(std::floor((r.xmin - bbox_.xmin) / dx)) - 1);
  const int c1 = std::min(nx_ - 1, static_cast<int>(std::floor((r.xmax - bbox_.xmin) / dx)) + 1);
  const int r0 = std::max(0, static_cast<int>(std::floor((bbox_.ymax - r.ymax) / dy)) - 1);
  const int r1 = std::min(ny_ - 1, static_cast<int>(std::floor((bbox_.ymax - r.ymin) / dy)) + 1);
  for (int row = r0; row <= r1; ++row) {
    for (int col = c0; col <= c1; ++col) {
      const int s = row * nx_ + col;
      if (cells_[static_cast<std::size_t>(s)].intersects(r)) out.push_back(s);
    }
  }
  return out;
}

BauGrid build_bau_grid(const Rect& bbox, int nx, int ny, int time_bins) {
  return BauGrid(bbox, nx, ny, time_bins);
}

namespace {

std::vector<int> spatial_set(const BauGrid& grid, const Support& s) {
  if (const auto* p = std::get_if<Point>(&s.shape)) {
    return grid.spatial_cells_meeting({p->x, p->y, p->x, p->y});
  }
  return grid.spatial_cells_meeting(std::get<Rect>(s.shape));
}

}  // namespace

SupportSet map_supports(const BauGrid& grid, std::span<const Support> geoms, SupportKind kind) {
  SupportSet out;
  out.kind = kind;
  out.geometries.assign(geoms.begin(), geoms.end());
  out.bau_index_sets.reserve(geoms.size());
  const char* label = kind == SupportKind::observation ? "observation support" : "prediction region";
  for (std::size_t j = 0; j < geoms.size(); ++j) {
    const Support& g = geoms[j];
    std::vector<int> ids;
    if (const auto* list = std::get_if<BauList>(&g.shape)) {
      for (int id : list->ids) {
        if (id < 0 || id >= grid.size()) {
          throw geometry_error(std::string(label) + " " + std::to_string(j) + ": BAU index " +
                               std::to_string(id) + " is outside the grid");
        }
      }
      ids = list->ids;
    } else {
      if (g.time && (*g.time < 0 || *g.time >= grid.n_time())) {
        throw geometry_error(std::string(label) + " " + std::to_string(j) + ": time bin " +
                             std::to_string(*g.time) + " is outside the grid");
      }
      const std::vector<int> spatial = spatial_set(grid, g);
      if (g.time) {
        for (int s : spatial) ids.push_back(grid.index(s, *g.time));
      } else {
        for (int t = 0; t < grid.n_time(); ++t) {
          for (int s : spatial) ids.push_back(grid.index(s, t));
        }
      }
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.empty()) {
      throw geometry_error(std::string(label) + " " + std::to_string(j) +
                           " does not intersect any BAU");
    }
    out.bau_index_sets.push_back(std::move(ids));
  }
  return out;
}

IncidenceMatrix build_incidence(const BauGrid& grid, const SupportSet& supports, bool normalise,
                                bool force_unit_sum) {
  IncidenceMatrix out;
  out.normalised = force_unit_sum ? false : normalise;
  std::vector<Eigen::Triplet<double>> trips;
  const Eigen::VectorXd& v = grid.rel_weights();
  for (std::size_t j = 0; j < supports.size(); ++j) {
    const auto& ids = supports.bau_index_sets[j];
    double total = 0.0;
    if (out.normalised) {
      for (int i : ids) total += v[i];
    }
    for (int i : ids) {
      double w = force_unit_sum ? 1.0 : v[i];
      if (out.normalised) w /= total;
      trips.emplace_back(static_cast<int>(j), i, w);
    }
  }
  out.weights.resize(static_cast<Eigen::Index>(supports.size()), grid.size());
  out.weights.setFromTriplets(trips.begin(), trips.end());
  out.weights.makeCompressed();
  return out;
}

}  // namespace frk
