#include "frk/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace frk::kernels {

double nearest_rank(std::span<const double> sorted, double percentile) {
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<long>(std::ceil(percentile / 100.0 * n));
  rank = std::clamp(rank, 1L, static_cast<long>(sorted.size()));
  return sorted[static_cast<std::size_t>(rank - 1)];
}

namespace {

using Entries = std::vector<std::pair<int, double>>;

Entries row_entries(std::span<const BasisFunction> fns, const Point& p) {
  Entries e;
  for (std::size_t l = 0; l < fns.size(); ++l) {
    const double d = std::hypot(p.x - fns[l].centre.x, p.y - fns[l].centre.y);
    const double v = bisquare(d, fns[l].aperture);
    if (v != 0.0) e.emplace_back(static_cast<int>(l), v);
  }
  return e;
}

SpMat assemble(const std::vector<Entries>& rows, std::size_t cols) {
  std::vector<Eigen::Triplet<double>> trips;
  std::size_t nnz = 0;
  for (const auto& r : rows) nnz += r.size();
  trips.reserve(nnz);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const auto& [l, v] : rows[i]) trips.emplace_back(static_cast<int>(i), l, v);
  }
  SpMat s(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  s.setFromTriplets(trips.begin(), trips.end());
  s.makeCompressed();
  return s;
}

void summarize_one(const Eigen::MatrixXd& samples, Eigen::Index i, std::span<const double> pct,
                   Summary& out, std::vector<double>& buf) {
  const Eigen::Index n = samples.cols();
  buf.resize(static_cast<std::size_t>(n));
  double sum = 0.0;
  for (Eigen::Index c = 0; c < n; ++c) {
    buf[static_cast<std::size_t>(c)] = samples(i, c);
    sum += samples(i, c);
  }
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : buf) ss += (v - mean) * (v - mean);
  out(i, 0) = mean;
  out(i, 1) = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  std::sort(buf.begin(), buf.end());
  for (std::size_t q = 0; q < pct.size(); ++q) {
    out(i, static_cast<Eigen::Index>(2 + q)) = nearest_rank(buf, pct[q]);
  }
}

// Order-statistics form: mean|x_i - y| - (1/m^2) * sum_i (2i - m - 1) x_(i).
double crps_one(double truth, const Eigen::MatrixXd& samples, Eigen::Index i, std::vector<double>& buf) {
  const Eigen::Index m = samples.cols();
  buf.resize(static_cast<std::size_t>(m));
  double abs_sum = 0.0;
  for (Eigen::Index c = 0; c < m; ++c) {
    buf[static_cast<std::size_t>(c)] = samples(i, c);
    abs_sum += std::abs(samples(i, c) - truth);
  }
  std::sort(buf.begin(), buf.end());
  double spread = 0.0;
  for (Eigen::Index k = 0; k < m; ++k) {
    spread += static_cast<double>(2 * (k + 1) - m - 1) * buf[static_cast<std::size_t>(k)];
  }
  const auto md = static_cast<double>(m);
  return abs_sum / md - spread / (md * md);
}

}  // namespace

namespace serial {

SpMat bisquare_design(std::span<const BasisFunction> fns, std::span<const Point> pts) {
  std::vector<Entries> rows(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) rows[i] = row_entries(fns, pts[i]);
  return assemble(rows, fns.size());
}

Summary summarize_rows(const Eigen::MatrixXd& samples, std::span<const double> percentiles) {
  Summary out(samples.rows(), 2 + static_cast<Eigen::Index>(percentiles.size()));
  std::vector<double> buf;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) summarize_one(samples, i, percentiles, out, buf);
  return out;
}

Eigen::VectorXd crps_rows(const Eigen::VectorXd& truth, const Eigen::MatrixXd& samples) {
  Eigen::VectorXd out(samples.rows());
  std::vector<double> buf;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) out[i] = crps_one(truth[i], samples, i, buf);
  return out;
}

}  // namespace serial

namespace omp {

SpMat bisquare_design(std::span<const BasisFunction> fns, std::span<const Point> pts) {
  std::vector<Entries> rows(pts.size());
  const auto n = static_cast<long>(pts.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = row_entries(fns, pts[static_cast<std::size_t>(i)]);
  return assemble(rows, fns.size());
}

Summary summarize_rows(const Eigen::MatrixXd& samples, std::span<const double> percentiles) {
  Summary out(samples.rows(), 2 + static_cast<Eigen::Index>(percentiles.size()));
#pragma omp parallel
  {
    std::vector<double> buf;
#pragma omp for schedule(static)
    for (Eigen::Index i = 0; i < samples.rows(); ++i) summarize_one(samples, i, percentiles, out, buf);
  }
  return out;
}

Eigen::VectorXd crps_rows(const Eigen::VectorXd& truth, const Eigen::MatrixXd& samples) {
  Eigen::VectorXd out(samples.rows());
#pragma omp parallel
  {
    std::vector<double> buf;
#pragma omp for schedule(static)
    for (Eigen::Index i = 0; i < samples.rows(); ++i) out[i] = crps_one(truth[i], samples, i, buf);
  }
  return out;
}

}  // namespace omp

}  // namespace frk::kernels
