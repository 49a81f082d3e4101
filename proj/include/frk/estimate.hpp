#pragma once

#include <optional>
#include <string>
#include <vector>

#include "frk/laplace.hpp"

namespace frk {

struct FitOptions {
  std::optional<double> known_sigma2fs;
  std::optional<double> known_psi;  // fixes the dispersion of dispersion families
  std::optional<ModelState> start;  // replaces the default initial values
  bool fix_alpha = false;
  bool fix_prior = false;  // spatial prior parameters
  bool fix_rho_t = false;
  bool fix_sigma2fs = false;
  bool fix_psi = false;
  double obj_tol = 1e-6;
  double grad_tol = 1e-3;
  int max_iter = 200;
  double fd_step = 1e-4;  // relative: h = fd_step * (1 + |x|)
  InnerOptions inner;
};

enum class Transform { identity, log, atanh };

struct ParamInfo {
  std::string name;
  Transform transform = Transform::identity;
  bool fixed = false;
};

/// Outcome of the fine-scale variance rule.
struct Sigma2fsRule {
  bool fixed = false;
  bool rough = false;  // fixed to the automatic moment-based estimate
  double value = 0.0;
};

/// Fixed to `user` when given; otherwise fixed to 0.1 * resid_var when no
/// observation support is a single BAU; otherwise free.
Sigma2fsRule resolve_sigma2fs(const SupportSet& supports, std::optional<double> user, double resid_var);

/// Maps theta to the unconstrained vector the optimiser works on.
class ThetaCodec {
 public:
  ThetaCodec(const ModelStructures& s, const ModelState& like, const FitOptions& opts, bool sigma2fs_fixed);

  const std::vector<ParamInfo>& params() const { return params_; }
  int n_free() const { return static_cast<int>(free_.size()); }

  Eigen::VectorXd encode_all(const ModelState& th) const;
  ModelState decode_all(const Eigen::VectorXd& full) const;
  Eigen::VectorXd encode(const ModelState& th) const;
  /// Free entries from `x`, fixed entries from `base`.
  ModelState decode(const Eigen::VectorXd& x, const ModelState& base) const;

 private:
  std::vector<ParamInfo> params_;
  std::vector<int> free_;
  ModelState shape_;
  bool tensor_ = false;
  bool fine_scale_ = false;
  bool dispersion_ = false;
};

struct FitReport {
  bool converged = false;
  int iterations = 0;
  int evaluations = 0;
  double grad_norm = 0.0;            // max |gradient| on the transformed scale
  std::vector<double> trace;         // Laplace log-likelihood after each accepted step
  std::vector<ParamInfo> params;
  Sigma2fsRule sigma2fs;
  double resid_var = 0.0;
  std::vector<std::string> warnings;
};

struct FitResult {
  ModelState theta;
  LaplaceResult laplace;
  FitReport report;
};

/// GLM-style fixed effects and the link-scale moment residual variance, ignoring random effects.
struct MomentFit {
  Eigen::VectorXd alpha;
  double resid_var = 1.0;
  double psi = 1.0;
};
MomentFit moment_fit(const ModelStructures& s);

/// Default starting theta (see MomentFit); fine-scale variance per `rule`.
ModelState initial_state(const ModelStructures& s, const MomentFit& mf, const Sigma2fsRule& rule);

/// Maximises the Laplace log-likelihood over theta with BFGS on transformed parameters.
FitResult fit(const ModelStructures& s, const FitOptions& opts = {});

/// Central finite-difference gradient of the Laplace log-likelihood in the free transformed parameters.
Eigen::VectorXd outer_gradient(const ModelStructures& s, const ThetaCodec& codec, const ModelState& theta,
                               const LaplaceResult& at, const FitOptions& opts);

}  // namespace frk
