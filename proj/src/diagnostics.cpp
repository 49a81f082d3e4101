#include "frk/diagnostics.hpp"

#include <cmath>
#include <string>

#include "frk/error.hpp"
#include "frk/kernels.hpp"

namespace frk {

namespace {

void same_length(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) throw config_error(std::string(what) + ": inputs must have equal lengths");
  if (a == 0) throw config_error(std::string(what) + ": no locations");
}

}  // namespace

double rmspe(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred) {
  same_length(truth.size(), pred.size(), "rmspe");
  return std::sqrt((truth - pred).squaredNorm() / static_cast<double>(truth.size()));
}

double mae(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred) {
  same_length(truth.size(), pred.size(), "mae");
  return (truth - pred).cwiseAbs().mean();
}

double mape(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred) {
  same_length(truth.size(), pred.size(), "mape");
  std::string zeros;
  int n_zero = 0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    if (truth[i] != 0.0) continue;
    if (n_zero < 10) zeros += (n_zero ? ", " : "") + std::to_string(i);
    ++n_zero;
  }
  if (n_zero > 0) {
    throw domain_error("mape: true value is zero at " + std::to_string(n_zero) + " location(s): " + zeros +
                       (n_zero > 10 ? ", ..." : ""));
  }
  return ((truth - pred).array() / truth.array()).abs().mean();
}

double crps_empirical(const Eigen::VectorXd& truth, const Eigen::MatrixXd& samples) {
  same_length(truth.size(), samples.rows(), "crps");
  if (samples.cols() < 2) throw config_error("crps: at least two samples per location are required");
  return kernels::omp::crps_rows(truth, samples).mean();
}

double interval_score(const Eigen::VectorXd& truth, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                      double alpha) {
  same_length(truth.size(), lower.size(), "interval score");
  same_length(truth.size(), upper.size(), "interval score");
  if (!(alpha > 0.0 && alpha < 1.0)) throw config_error("interval score: alpha must lie in (0, 1)");
  double total = 0.0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    double s = upper[i] - lower[i];
    if (truth[i] < lower[i]) s += 2.0 / alpha * (lower[i] - truth[i]);
    if (truth[i] > upper[i]) s += 2.0 / alpha * (truth[i] - upper[i]);
    total += s;
  }
  return total / static_cast<double>(truth.size());
}

double coverage(const Eigen::VectorXd& truth, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  same_length(truth.size(), lower.size(), "coverage");
  same_length(truth.size(), upper.size(), "coverage");
  Eigen::Index inside = 0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    if (lower[i] <= truth[i] && truth[i] <= upper[i]) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(truth.size());
}

double brier(const Eigen::VectorXd& truth, const Eigen::VectorXd& prob) {
  same_length(truth.size(), prob.size(), "brier");
  for (Eigen::Index i = 0; i < prob.size(); ++i) {
    if (!(prob[i] >= 0.0 && prob[i] <= 1.0)) {
      throw domain_error("brier: predicted probability " + std::to_string(prob[i]) + " at location " +
                         std::to_string(i) + " is outside [0, 1]");
    }
    if (truth[i] != 0.0 && truth[i] != 1.0) {
      throw domain_error("brier: outcome at location " + std::to_string(i) + " is not 0 or 1");
    }
  }
  return (truth - prob).squaredNorm() / static_cast<double>(truth.size());
}

}  // namespace frk
