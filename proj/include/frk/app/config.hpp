#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "frk/covpar.hpp"
#include "frk/family.hpp"
#include "frk/geometry.hpp"

namespace frk::app {

struct GridConfig {
  Rect bbox{0.0, 0.0, 1.0, 1.0};
  int nx = 64;
  int ny = 64;
  int time_bins = 1;
  std::optional<double> size_param;  // k_i for every BAU
};

struct SimulateConfig {
  std::string scenario;  // poisson_point | negbin_areal | gaussian_point | poisson_spacetime
  int m = 750;           // point scenarios
  int block = 5;         // coarse block edge in BAUs (negbin_areal)
  double noise_sd = 0.2; // gaussian_point measurement error
  double fine_scale_sd = 0.2;  // sd of the BAU-level fine-scale term in spatial scenarios
  std::optional<int> holdout_time;  // poisson_spacetime; default middle bin
};

struct ModelConfig {
  Family family = Family::poisson;
  Link link = Link::log;
  PriorType prior = PriorType::Q_leroux;
  int n_res = 2;
  int temporal_basis = 0;  // r_t; 0 for a spatial-only basis
  double taper_multiplier = 3.0;
  bool fs_by_spatial_bau = false;
  bool fine_scale = true;
  std::optional<double> known_sigma2fs;
  std::optional<double> known_psi;
  std::string aggregation = "average";  // average | sum
};

struct FitConfig {
  int max_iter = 200;
  double obj_tol = 1e-6;
  double grad_tol = 1e-3;
};

struct PredictConfig {
  int n_mc = 400;
  std::vector<double> percentiles{5.0, 95.0};
  bool plots = true;
  std::string sample_target = "mu";  // which sample matrix to dump; "" for none
};

struct ScoreConfig {
  std::string target = "mu";
  std::string subset = "unobserved";  // unobserved | all
  double alpha = 0.1;
  bool wall_time = true;
  std::string label;
  bool append = false;
};

struct PathsConfig {
  std::filesystem::path out_dir = "out";
  std::filesystem::path data;         // default out_dir/data.csv
  std::filesystem::path truth;        // default out_dir/truth.csv
  std::filesystem::path regions;      // optional
  std::filesystem::path fit_state;    // default out_dir/fit.bin
  std::filesystem::path report;       // default out_dir/fit_report.json
  std::filesystem::path predictions;  // default out_dir/predictions.csv
  std::filesystem::path scores;       // default out_dir/scores.csv
};

struct RunConfig {
  std::optional<std::uint64_t> seed;
  PathsConfig paths;
  GridConfig grid;
  SimulateConfig simulate;
  ModelConfig model;
  FitConfig fit;
  PredictConfig predict;
  ScoreConfig score;
};

/// Strict parse: unknown keys and wrong types are config errors naming the key.
/// Relative paths are resolved against `base_dir`.
RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = ".");
/// Reads `path` and applies `overrides` ("section.key=json_value") before parsing.
RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

}  // namespace frk::app
