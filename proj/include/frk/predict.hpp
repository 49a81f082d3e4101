#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "frk/estimate.hpp"
#include "frk/kernels.hpp"

namespace frk {

/// Independent stream seed for column `col` of a sample matrix.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t col);

/// Y_MC (N x n_mc) = T alpha + [S I] U with U ~ Gau(u_hat, H^{-1}); fine-scale
/// terms at BAUs without data are drawn from their prior.
Eigen::MatrixXd sample_latent(const ModelStructures& s, const ModelState& theta, const LaplaceResult& lr, int n_mc,
                              std::uint64_t seed);

struct Targets {
  std::optional<Eigen::MatrixXd> mu;
  std::optional<Eigen::MatrixXd> pi;
  std::vector<std::string> warnings;
};

/// Elementwise mean (and probability) of a latent sample matrix. `k` holds one
/// size parameter per row; it may be absent when the family needs none.
Targets transform_targets(const Eigen::MatrixXd& y, Family f, Link l, const std::optional<Eigen::VectorXd>& k);

struct RegionSamples {
  Eigen::MatrixXd mu;
  std::optional<Eigen::MatrixXd> pi;
  std::optional<Eigen::VectorXd> k;  // summed size parameters per region
};

/// M_P = C_P M; for size families pi_P = h(mu_P; k_P) with k_P = C_P k (unit weights).
RegionSamples aggregate_regions(const Eigen::MatrixXd& m, const IncidenceMatrix& cp, Family f,
                                const std::optional<Eigen::VectorXd>& k);

/// One draw from the data model per entry. Rows share k[row].
Eigen::MatrixXd sample_predictive_data(const Eigen::MatrixXd& m, Family f, double psi,
                                       const std::optional<Eigen::VectorXd>& k, std::uint64_t seed);

/// Per-row mean, sd and nearest-rank percentiles.
kernels::Summary summarize(const Eigen::MatrixXd& samples, const std::vector<double>& percentiles);

enum class Target { latent, mean, prob, data };
std::string to_string(Target t);

struct TargetSummary {
  Target target;
  kernels::Summary table;  // rows = locations; mean, sd, percentiles
};

struct PredictOptions {
  int n_mc = 400;
  std::uint64_t seed = 1;
  std::vector<double> percentiles{5.0, 95.0};
  bool keep_samples = false;
};

struct PredictionResult {
  int n_locations = 0;
  bool regions = false;
  std::vector<double> percentiles;
  std::vector<TargetSummary> summaries;
  std::optional<Eigen::MatrixXd> y_mc, m, m_p;  // retained on request
  std::vector<std::string> warnings;

  const TargetSummary* find(Target t) const;
};

/// BAU-level prediction, or region-level when `regions` is given.
PredictionResult predict(const ModelStructures& s, const FitResult& fit, const PredictOptions& opts,
                         const SupportSet* regions = nullptr);

/// Column-major binary dump: 8-byte magic, uint32 rows, uint32 cols, doubles.
void write_samples(std::ostream& os, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_samples(std::istream& is);

}  // namespace frk
