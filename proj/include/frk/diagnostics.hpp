#pragma once

#include <Eigen/Dense>

namespace frk {

double rmspe(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred);
double mae(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred);
/// Throws naming the locations where the truth is zero.
double mape(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred);

/// Mean over rows of the order-statistics CRPS estimator; `samples` is locations x draws.
double crps_empirical(const Eigen::VectorXd& truth, const Eigen::MatrixXd& samples);

/// Mean interval score of central (1 - alpha) intervals [lower, upper].
double interval_score(const Eigen::VectorXd& truth, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                      double alpha);

double coverage(const Eigen::VectorXd& truth, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

/// Mean squared difference between binary outcomes and predicted probabilities.
double brier(const Eigen::VectorXd& truth, const Eigen::VectorXd& prob);

}  // namespace frk
