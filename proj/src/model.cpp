#include "frk/model.hpp"

#include <algorithm>
#include <limits>

#include "frk/error.hpp"
#include "hessian_plan.hpp"

namespace frk {

Eigen::VectorXd expand_fs_variances(const BauGrid& grid, bool fs_by_spatial_bau, const Eigen::VectorXd& sigma2) {
  const int n = grid.size();
  Eigen::VectorXd out(n);
  if (fs_by_spatial_bau) {
    if (grid.n_time() < 2) {
      throw config_error("fs_by_spatial_BAU requires a spatio-temporal grid (time_bins > 1)");
    }
    if (sigma2.size() != grid.n_spatial()) {
      throw config_error("fs_by_spatial_BAU: need one fine-scale variance per spatial BAU");
    }
    for (int i = 0; i < n; ++i) out[i] = sigma2[grid.spatial_of(i)] * grid.fs_scale()[i];
  } else {
    if (sigma2.size() != 1) throw config_error("fine-scale variance must be a scalar unless fs_by_spatial_BAU is set");
    out = sigma2[0] * grid.fs_scale();
  }
  return out;
}

ModelStructures::ModelStructures(BauGrid grid, BasisSet basis, ObservationSet obs, ModelSpec spec)
    : grid_(std::move(grid)), basis_(std::move(basis)), obs_(std::move(obs)), spec_(spec) {
  if (obs_.z.size() != static_cast<Eigen::Index>(obs_.supports.size())) {
    throw config_error("observations: one support per datum is required");
  }
  if (obs_.z.size() == 0) throw config_error("observations: no data");
  if (spec_.fs_by_spatial_bau && grid_.n_time() < 2) {
    throw config_error("fs_by_spatial_BAU requires a spatio-temporal grid (time_bins > 1)");
  }
  if (basis_.is_tensor() != (grid_.n_time() > 1) && basis_.size() > 0) {
    throw config_error("basis: a spatio-temporal grid needs a tensor-product basis (and vice versa)");
  }
  const bool size_family = has_size(spec_.family);
  cz_ = build_incidence(grid_, obs_.supports, spec_.normalise_wts, size_family);

  std::vector<int> all;
  for (const auto& c : obs_.supports.bau_index_sets) all.insert(all.end(), c.begin(), c.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  touched_ = std::move(all);
  std::vector<int> local(static_cast<std::size_t>(grid_.size()), -1);
  for (std::size_t a = 0; a < touched_.size(); ++a) local[static_cast<std::size_t>(touched_[a])] = static_cast<int>(a);

  const int nt = n_touched();
  std::vector<Eigen::Triplet<double>> trips;
  for (int j = 0; j < cz_.weights.outerSize(); ++j) {
    for (SpMatRow::InnerIterator it(cz_.weights, j); it; ++it) {
      trips.emplace_back(j, local[static_cast<std::size_t>(it.col())], it.value());
    }
  }
  cz_touched_.resize(n_obs(), nt);
  cz_touched_.setFromTriplets(trips.begin(), trips.end());
  cz_touched_.makeCompressed();

  const double nan = std::numeric_limits<double>::quiet_NaN();
  k_touched_ = Eigen::VectorXd::Constant(nt, nan);
  k_z_ = Eigen::VectorXd::Constant(n_obs(), nan);
  if (size_family) {
    if (!grid_.size_params()) {
      throw config_error("the " + to_string(spec_.family) + " family needs BAU-level size parameters (k)");
    }
    for (int a = 0; a < nt; ++a) k_touched_[a] = (*grid_.size_params())[touched_[static_cast<std::size_t>(a)]];
    k_z_ = cz_touched_ * k_touched_;
  }
  for (int j = 0; j < n_obs(); ++j) check_support(spec_.family, obs_.z[j], k_z_[j]);

  s_full_ = bau_design(basis_, grid_);
  const SpMatRow s_rows = s_full_;
  std::vector<Eigen::Triplet<double>> st;
  for (int a = 0; a < nt; ++a) {
    for (SpMatRow::InnerIterator it(s_rows, touched_[static_cast<std::size_t>(a)]); it; ++it) {
      st.emplace_back(a, static_cast<int>(it.col()), it.value());
    }
  }
  s_touched_.resize(nt, n_basis());
  s_touched_.setFromTriplets(st.begin(), st.end());
  s_touched_.makeCompressed();

  t_touched_.resize(nt, n_covariates());
  for (int a = 0; a < nt; ++a) t_touched_.row(a) = grid_.covariates().row(touched_[static_cast<std::size_t>(a)]);

  if (spec_.fine_scale) {
    for (int a = 0; a < nt; ++a) st.emplace_back(a, n_basis() + a, 1.0);
  }
  effects_design_.resize(nt, n_random());
  effects_design_.setFromTriplets(st.begin(), st.end());
  effects_design_.makeCompressed();
  plan_ = detail::build_hessian_plan(*this);
}

Eigen::VectorXd ModelStructures::fs_variances_touched(const ModelState& theta) const {
  const int nt = n_touched();
  Eigen::VectorXd out(nt);
  for (int a = 0; a < nt; ++a) {
    const int i = touched_[static_cast<std::size_t>(a)];
    const double s2 = spec_.fs_by_spatial_bau ? theta.sigma2fs[grid_.spatial_of(i)] : theta.sigma2fs[0];
    out[a] = s2 * grid_.fs_scale()[i];
  }
  return out;
}

Eigen::VectorXd ModelStructures::support_means(const Eigen::VectorXd& y_touched) const {
  Eigen::VectorXd mu(y_touched.size());
  for (Eigen::Index a = 0; a < y_touched.size(); ++a) {
    mu[a] = mean_from_latent(y_touched[a], spec_.link, spec_.family, k_touched_[a]).mu;
  }
  return cz_touched_ * mu;
}

}  // namespace frk
