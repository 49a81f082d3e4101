#pragma once

#include <memory>
#include <optional>

#include <Eigen/SparseCholesky>

#include "frk/model.hpp"

namespace frk {

using SparseLLT = Eigen::SimplicialLLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>>;

/// theta-dependent prior pieces shared by every evaluation at one theta.
struct PriorTerms {
  SpMat q;                 // precision of eta
  double logdet_q = 0.0;
  Eigen::VectorXd fs_var;  // fine-scale variances of touched BAUs
};

PriorTerms prior_terms(const ModelStructures& s, const ModelState& theta);

/// u = (eta, xi over touched BAUs) at its mode.
struct RandomEffects {
  Eigen::VectorXd u;
  int iterations = 0;
  double grad_norm = 0.0;  // max-abs gradient at u
  std::shared_ptr<const SparseLLT> factor;  // observed-information factor at u, when computed there
};

struct LaplaceResult {
  Eigen::VectorXd u_hat;
  std::shared_ptr<const SparseLLT> hess_factor;  // factor of -d2 l / du du at the mode
  double loglik = 0.0;                           // Laplace-approximated log-likelihood
  double complete = 0.0;                         // complete-data log-likelihood at the mode
  int iterations = 0;
  double grad_norm = 0.0;
};

struct InnerOptions {
  double tol = 1e-8;
  int max_iter = 100;
};

/// Latent process on touched BAUs: T alpha + [S I] u.
Eigen::VectorXd latent_touched(const ModelStructures& s, const ModelState& theta, const Eigen::VectorXd& u);

/// log [Z | mu_Z, psi] + log [eta | theta] + log [xi | sigma2].
/// Returns -inf when some mu_Z leaves the family's mean domain.
double complete_loglik(const ModelStructures& s, const ModelState& theta, const Eigen::VectorXd& u);
double complete_loglik(const ModelStructures& s, const ModelState& theta, const PriorTerms& pt,
                       const Eigen::VectorXd& u);

/// Analytic gradient of complete_loglik with respect to u.
Eigen::VectorXd complete_loglik_gradient(const ModelStructures& s, const ModelState& theta, const Eigen::VectorXd& u);

/// Negative Hessian of complete_loglik with respect to u (observed information).
SpMat complete_loglik_neg_hessian(const ModelStructures& s, const ModelState& theta, const Eigen::VectorXd& u);

/// Safeguarded Newton ascent on the complete log-likelihood.
RandomEffects inner_mode(const ModelStructures& s, const ModelState& theta, const PriorTerms& pt,
                         const Eigen::VectorXd& u0, const InnerOptions& opts = {});

/// l*(theta; Z) ~= l(theta; Z, u_hat) + (p/2) log 2pi - (1/2) log|H^{-1}|.
LaplaceResult laplace_objective(const ModelStructures& s, const ModelState& theta,
                                const std::optional<Eigen::VectorXd>& u0 = std::nullopt,
                                const InnerOptions& opts = {});

}  // namespace frk
