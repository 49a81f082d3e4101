#include "frk/basis.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

#include "frk/error.hpp"
#include "frk/kernels.hpp"

namespace frk {

std::vector<int> BasisSet::resolution_members(int k) const {
  std::vector<int> out;
  for (std::size_t l = 0; l < functions.size(); ++l) {
    if (functions[l].resolution == k) out.push_back(static_cast<int>(l));
  }
  return out;
}

BasisSet auto_basis(const Rect& bbox, int n_res) {
  if (n_res < 1) throw config_error("basis: n_res must be >= 1");
  if (!(bbox.width() > 0.0) || !(bbox.height() > 0.0)) {
    throw geometry_error("basis: bounding box is degenerate");
  }
  BasisSet b;
  b.n_res = n_res;
  b.regular = true;
  for (int k = 1; k <= n_res; ++k) {
    const int n = static_cast<int>(std::ceil(3.0 * std::ldexp(1.0, k - 1)));
    const double hx = bbox.width() / (n - 1);
    const double hy = bbox.height() / (n - 1);
    const double aperture = 1.5 * std::max(hx, hy);
    for (int row = 0; row < n; ++row) {
      for (int col = 0; col < n; ++col) {
        b.functions.push_back({{bbox.xmin + col * hx, bbox.ymax - row * hy}, aperture, k, row, col});
      }
    }
    b.mindist.push_back(std::min(hx, hy));
    b.lattice_cols.push_back(n);
    b.lattice_rows.push_back(n);
  }
  return b;
}

BasisSet temporal_basis(double t0, double t1, int r_t) {
  if (r_t < 1) throw config_error("basis: temporal basis needs at least one function");
  if (t1 < t0) throw geometry_error("basis: temporal range is reversed");
  BasisSet b;
  b.n_res = 1;
  b.regular = true;
  const double span = std::max(t1 - t0, 1.0);
  const double h = r_t > 1 ? (t1 - t0) / (r_t - 1) : span;
  const double aperture = r_t > 1 ? 1.5 * h : 1.5 * span;
  const double start = r_t > 1 ? t0 : 0.5 * (t0 + t1);
  for (int i = 0; i < r_t; ++i) b.functions.push_back({{start + i * h, 0.0}, aperture, 1, 0, i});
  b.mindist.push_back(h > 0.0 ? h : 1.0);
  b.lattice_cols.push_back(r_t);
  b.lattice_rows.push_back(1);
  return b;
}

BasisSet tensor_basis(const BasisSet& spatial, const BasisSet& temporal) {
  if (spatial.is_tensor() || temporal.is_tensor()) {
    throw config_error("basis: tensor factors must themselves be non-tensor bases");
  }
  BasisSet b = spatial;
  b.temporal = temporal.functions;
  return b;
}

SpMat eval_basis(const BasisSet& basis, std::span<const Point> points) {
  if (basis.is_tensor()) throw config_error("basis: tensor basis needs time coordinates");
  return kernels::omp::bisquare_design(basis.functions, points);
}

SpMat eval_basis(const BasisSet& basis, std::span<const Point> points, std::span<const double> times) {
  if (!basis.is_tensor()) return eval_basis(basis, points);
  if (times.size() != points.size()) throw config_error("basis: one time coordinate per point is required");
  const SpMat sp = kernels::omp::bisquare_design(basis.functions, points);
  std::vector<Point> tp(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) tp[i] = {times[i], 0.0};
  const SpMat tm = kernels::omp::bisquare_design(basis.temporal, tp);
  const SpMatRow spr = sp;
  const SpMatRow tmr = tm;
  const int rs = basis.n_spatial();
  std::vector<Eigen::Triplet<double>> trips;
  for (Eigen::Index i = 0; i < spr.rows(); ++i) {
    for (SpMatRow::InnerIterator it_t(tmr, i); it_t; ++it_t) {
      for (SpMatRow::InnerIterator it_s(spr, i); it_s; ++it_s) {
        trips.emplace_back(static_cast<int>(i), static_cast<int>(it_t.col()) * rs + static_cast<int>(it_s.col()),
                           it_t.value() * it_s.value());
      }
    }
  }
  SpMat out(spr.rows(), basis.size());
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  return out;
}

SpMat bau_design(const BasisSet& basis, const BauGrid& grid) {
  const int n = grid.size();
  std::vector<Point> pts(static_cast<std::size_t>(n));
  std::vector<double> ts(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    pts[static_cast<std::size_t>(i)] = grid.centroid(i);
    ts[static_cast<std::size_t>(i)] = grid.time_of(i);
  }
  return basis.is_tensor() ? eval_basis(basis, pts, ts) : eval_basis(basis, pts);
}

void write_basis_csv(std::ostream& os, const BasisSet& basis) {
  os.precision(17);
  os << "centroid_x,centroid_y,aperture,resolution\n";
  for (const auto& f : basis.functions) {
    os << f.centre.x << ',' << f.centre.y << ',' << f.aperture << ',' << f.resolution << '\n';
  }
}

BasisSet read_basis_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw io_error("basis csv: missing header");
  if (line.rfind("centroid_x,centroid_y,aperture,resolution", 0) != 0) {
    throw io_error("basis csv: header must be centroid_x,centroid_y,aperture,resolution");
  }
  BasisSet b;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    double vals[4];
    for (double& v : vals) {
      if (!std::getline(ss, cell, ',')) throw io_error("basis csv line " + std::to_string(lineno) + ": expected 4 fields");
      try {
        v = std::stod(cell);
      } catch (const std::exception&) {
        throw io_error("basis csv line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    b.functions.push_back({{vals[0], vals[1]}, vals[2], static_cast<int>(vals[3]), -1, -1});
  }
  if (b.functions.empty()) throw io_error("basis csv: no functions");
  int max_res = 0;
  for (const auto& f : b.functions) max_res = std::max(max_res, f.resolution);
  b.n_res = max_res;
  b.regular = true;
  for (int k = 1; k <= max_res; ++k) {
    const auto members = b.resolution_members(k);
    if (members.empty()) throw io_error("basis csv: resolutions must be contiguous from 1");
    std::set<double> xs;
    std::set<double, std::greater<>> ys;
    for (int l : members) {
      xs.insert(b.functions[l].centre.x);
      ys.insert(b.functions[l].centre.y);
    }
    double md = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t c = a + 1; c < members.size(); ++c) {
        const auto& p = b.functions[members[a]].centre;
        const auto& q = b.functions[members[c]].centre;
        md = std::min(md, std::hypot(p.x - q.x, p.y - q.y));
      }
    }
    b.mindist.push_back(std::isfinite(md) ? md : 1.0);
    const bool full = xs.size() * ys.size() == members.size();
    if (full) {
      std::map<double, int> xi;
      std::map<double, int, std::greater<>> yi;
      int c = 0;
      for (double x : xs) xi[x] = c++;
      c = 0;
      for (double y : ys) yi[y] = c++;
      for (int l : members) {
        b.functions[l].col = xi[b.functions[l].centre.x];
        b.functions[l].row = yi[b.functions[l].centre.y];
      }
    }
    b.regular = b.regular && full;
    b.lattice_cols.push_back(static_cast<int>(xs.size()));
    b.lattice_rows.push_back(static_cast<int>(ys.size()));
  }
  return b;
}

}  // namespace frk
