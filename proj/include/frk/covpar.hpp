#pragma once

#include <string>
#include <vector>

#include "frk/basis.hpp"

namespace frk {

enum class PriorType { K_tapered, Q_leroux, Q_dist };

PriorType parse_prior_type(const std::string& name);
std::string to_string(PriorType t);

/// Per-resolution parameters of the basis-coefficient prior. Only the vectors
/// used by `type` need to be filled:
///   K_tapered: sigma2, tau     Q_leroux: kappa, rho     Q_dist: kappa, rho, tau
/// `rho_t` is the AR(1) coefficient of the temporal factor (tensor bases only).
struct CoefPrior {
  PriorType type = PriorType::Q_leroux;
  std::vector<double> sigma2;
  std::vector<double> tau;
  std::vector<double> kappa;
  std::vector<double> rho;
  double taper_multiplier = 3.0;
  double rho_t = 0.0;

  /// beta_k = taper_multiplier * mindist(k).
  double taper_length(const BasisSet& basis, int k) const;
};

/// {1 - d/beta}_+^2 {1 + d/(2 beta)}
double spherical_taper(double d, double beta);

/// Tapered exponential covariance of the spatial coefficients, block-diagonal over resolutions.
SpMat build_K(const BasisSet& basis, const CoefPrior& prior);

/// Lattice (Leroux) precision; first-order horizontal/vertical neighbours.
SpMat build_Q_leroux(const BasisSet& basis, const CoefPrior& prior);

/// Distance-based precision with tapered exponential partial correlations.
SpMat build_Q_dist(const BasisSet& basis, const CoefPrior& prior);

/// AR(1) precision with unit marginal variance: (1/(1-rho^2)) tridiag(-rho, 1+rho^2, -rho),
/// with 1 in the two corner diagonal entries.
SpMat ar1_precision(int n, double rho_t);

/// Sparse Kronecker product Q_t ⊗ Q_s.
SpMat build_Q_spacetime(const SpMat& q_t, const SpMat& q_s);

/// Precision of the full coefficient vector eta (spatial precision, or inverse of K,
/// Kronecker-multiplied by the temporal AR(1) factor for tensor bases).
SpMat coefficient_precision(const BasisSet& basis, const CoefPrior& prior);

}  // namespace frk
