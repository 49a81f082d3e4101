#pragma once

// Data-parallel inner loops. Each kernel exists twice: `omp` is what the
// library calls, `serial` is the reference the tests and benchmarks compare
// against. Both must produce bit-identical results.

#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "frk/basis.hpp"

namespace frk::kernels {

/// Row summary layout: column 0 mean, column 1 sd, then one column per percentile.
using Summary = Eigen::MatrixXd;

/// Nearest-rank percentile of an ascending sample.
double nearest_rank(std::span<const double> sorted, double percentile);

namespace serial {

SpMat bisquare_design(std::span<const BasisFunction> fns, std::span<const Point> pts);
Summary summarize_rows(const Eigen::MatrixXd& samples, std::span<const double> percentiles);
Eigen::VectorXd crps_rows(const Eigen::VectorXd& truth, const Eigen::MatrixXd& samples);

template <class Fn>
void for_each_column(Eigen::Index cols, Fn&& fn) {
  for (Eigen::Index c = 0; c < cols; ++c) fn(c);
}

}  // namespace serial

namespace omp {

SpMat bisquare_design(std::span<const BasisFunction> fns, std::span<const Point> pts);
Summary summarize_rows(const Eigen::MatrixXd& samples, std::span<const double> percentiles);
Eigen::VectorXd crps_rows(const Eigen::VectorXd& truth, const Eigen::MatrixXd& samples);

/// `fn(c)` must touch only column c of its outputs.
template <class Fn>
void for_each_column(Eigen::Index cols, Fn&& fn) {
#pragma omp parallel for schedule(static)
  for (Eigen::Index c = 0; c < cols; ++c) fn(c);
}

}  // namespace omp

}  // namespace frk::kernels
