#pragma once

#include <optional>
#include <string>
#include <vector>

#include "frk/app/config.hpp"
#include "frk/app/io.hpp"
#include "frk/estimate.hpp"
#include "frk/predict.hpp"

namespace frk::app {

BauGrid make_grid(const RunConfig& cfg);
BasisSet make_basis(const RunConfig& cfg, const BauGrid& grid);
ModelSpec make_spec(const RunConfig& cfg);

/// Maps the data onto the grid and checks any per-datum size against C_Z k.
ModelStructures make_structures(const RunConfig& cfg, const std::vector<DataRow>& data);

struct Simulation {
  std::vector<DataRow> data;
  std::vector<TruthRow> truth;
};
/// Scenarios: poisson_point, negbin_areal, gaussian_point, poisson_spacetime.
Simulation simulate(const RunConfig& cfg);

/// Everything needed to rebuild the fitted model from the same config and data.
struct FitState {
  ModelSpec spec;
  int n_bau = 0;
  int n_basis = 0;
  int n_obs = 0;
  ModelState theta;
  Eigen::VectorXd u_hat;
  double loglik = 0.0;
};
std::string encode_fit_state(const FitState& st);
FitState decode_fit_state(const std::string& bytes);

/// Laplace result at the stored parameters; reproduces the stored log-likelihood.
LaplaceResult reload_laplace(const ModelStructures& s, const FitState& st);

std::string report_json(const FitResult& r, const ModelStructures& s);

struct Scores {
  std::string target;
  std::string subset;
  int n = 0;
  double rmspe = 0.0, mae = 0.0, mape = 0.0;
  std::optional<double> crps;
  double is = 0.0, cvg = 0.0;
  std::optional<double> brier;
  std::optional<double> wall_time;
};

/// Scores predictions (joined on id) against the truth file.
Scores score_files(const RunConfig& cfg);
std::string format_scores(const Scores& s, const RunConfig& cfg, bool header);

// Subcommands. Each writes its outputs atomically and returns warnings for the caller to print.
std::vector<std::string> cmd_simulate(const RunConfig& cfg);
std::vector<std::string> cmd_fit(const RunConfig& cfg);
std::vector<std::string> cmd_predict(const RunConfig& cfg);
std::vector<std::string> cmd_score(const RunConfig& cfg);

/// Binary PPM heatmap of one value per BAU, time slices side by side.
std::string render_ppm(const BauGrid& grid, const Eigen::VectorXd& values, int cell_px);

}  // namespace frk::app
