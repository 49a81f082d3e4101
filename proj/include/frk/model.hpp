#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "frk/basis.hpp"
#include "frk/covpar.hpp"
#include "frk/family.hpp"
#include "frk/geometry.hpp"

namespace frk {

namespace detail {
struct HessianPlan;
}

/// Model choices that stay fixed during fitting.
struct ModelSpec {
  Family family = Family::gaussian;
  Link link = Link::identity;
  PriorType prior = PriorType::Q_leroux;
  double taper_multiplier = 3.0;
  bool fs_by_spatial_bau = false;
  bool fine_scale = true;       // include the BAU-level fine-scale effect xi
  bool normalise_wts = true;    // weighted average (true) or weighted sum (false)
};

/// theta = (alpha, prior parameters, fine-scale variance(s), dispersion).
struct ModelState {
  Eigen::VectorXd alpha;
  CoefPrior prior;
  Eigen::VectorXd sigma2fs;  // length 1, or N_s with fs_by_spatial_bau
  double psi = 1.0;
};

/// Diagonal of the fine-scale covariance over all N BAUs: sigma2 (scalar or
/// per spatial BAU, replicated over time) elementwise-scaled by V.
Eigen::VectorXd expand_fs_variances(const BauGrid& grid, bool fs_by_spatial_bau, const Eigen::VectorXd& sigma2);

/// Observations in model form: data, their BAU supports and size parameters.
struct ObservationSet {
  Eigen::VectorXd z;
  SupportSet supports;
};

/// Immutable design built once per dataset: basis design, covariates and the
/// incidence matrix restricted to the BAUs touched by data, plus the full-grid
/// pieces needed for prediction.
class ModelStructures {
 public:
  ModelStructures(BauGrid grid, BasisSet basis, ObservationSet obs, ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  const BauGrid& grid() const { return grid_; }
  const BasisSet& basis() const { return basis_; }
  const SupportSet& supports() const { return obs_.supports; }

  int n_obs() const { return static_cast<int>(obs_.z.size()); }
  int n_basis() const { return basis_.size(); }
  int n_touched() const { return static_cast<int>(touched_.size()); }
  /// Number of random effects p = r + (touched BAUs, if fine scale is on).
  int n_random() const { return n_basis() + (spec_.fine_scale ? n_touched() : 0); }
  int n_covariates() const { return static_cast<int>(grid_.covariates().cols()); }

  const Eigen::VectorXd& z() const { return obs_.z; }
  const Eigen::VectorXd& k_obs_support() const { return k_z_; }  // NaN for non-size families
  const std::vector<int>& touched() const { return touched_; }
  const IncidenceMatrix& cz() const { return cz_; }

  const SpMatRow& cz_touched() const { return cz_touched_; }
  const SpMat& s_touched() const { return s_touched_; }
  const Eigen::MatrixXd& t_touched() const { return t_touched_; }
  const Eigen::VectorXd& k_touched() const { return k_touched_; }
  /// [S I] restricted to touched BAUs (or S alone without fine scale).
  const SpMat& effects_design() const { return effects_design_; }

  const SpMat& s_full() const { return s_full_; }

  /// Fine-scale variances of the touched BAUs under theta.
  Eigen::VectorXd fs_variances_touched(const ModelState& theta) const;

  /// Mean over observation supports for a given BAU-level latent vector on touched BAUs.
  Eigen::VectorXd support_means(const Eigen::VectorXd& y_touched) const;

  /// Precomputed assembly of the Laplace Hessian (internal).
  const detail::HessianPlan& hessian_plan() const { return *plan_; }

 private:
  BauGrid grid_;
  BasisSet basis_;
  ObservationSet obs_;
  ModelSpec spec_;
  IncidenceMatrix cz_;
  std::vector<int> touched_;
  SpMatRow cz_touched_;
  SpMat s_touched_;
  Eigen::MatrixXd t_touched_;
  Eigen::VectorXd k_touched_;
  Eigen::VectorXd k_z_;
  SpMat effects_design_;
  SpMat s_full_;
  std::shared_ptr<const detail::HessianPlan> plan_;
};

namespace detail {
std::shared_ptr<const HessianPlan> build_hessian_plan(const ModelStructures& s);
}

}  // namespace frk
