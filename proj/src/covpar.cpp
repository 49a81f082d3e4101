#include "frk/covpar.hpp"

#include <cmath>
#include <map>

#include <unsupported/Eigen/KroneckerProduct>

#include "frk/error.hpp"

namespace frk {

PriorType parse_prior_type(const std::string& name) {
  if (name == "K_tapered") return PriorType::K_tapered;
  if (name == "Q_leroux") return PriorType::Q_leroux;
  if (name == "Q_dist") return PriorType::Q_dist;
  throw config_error("unknown prior variant '" + name + "' (expected K_tapered, Q_leroux or Q_dist)");
}

std::string to_string(PriorType t) {
  switch (t) {
    case PriorType::K_tapered: return "K_tapered";
    case PriorType::Q_leroux: return "Q_leroux";
    case PriorType::Q_dist: return "Q_dist";
  }
  return "?";
}

double CoefPrior::taper_length(const BasisSet& basis, int k) const {
  return taper_multiplier * basis.mindist.at(static_cast<std::size_t>(k - 1));
}

double spherical_taper(double d, double beta) {
  if (d >= beta) return 0.0;
  const double u = 1.0 - d / beta;
  return u * u * (1.0 + d / (2.0 * beta));
}

namespace {

void require_sizes(const std::vector<double>& v, int n_res, const char* name) {
  if (static_cast<int>(v.size()) != n_res) {
    throw config_error(std::string("prior: expected one '") + name + "' per resolution (" + std::to_string(n_res) + ")");
  }
}

void require_positive(const std::vector<double>& v, const char* name) {
  for (double x : v) {
    if (!(x > 0.0) || !std::isfinite(x)) throw domain_error(std::string("prior: parameter '") + name + "' must be > 0");
  }
}

void require_nonneg(const std::vector<double>& v, const char* name) {
  for (double x : v) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw domain_error(std::string("prior: parameter '") + name + "' must be >= 0");
  }
}

double dist(const BasisFunction& a, const BasisFunction& b) {
  return std::hypot(a.centre.x - b.centre.x, a.centre.y - b.centre.y);
}

SpMat from_triplets(int n, std::vector<Eigen::Triplet<double>>& trips) {
  SpMat m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return m;
}

}  // namespace

SpMat build_K(const BasisSet& basis, const CoefPrior& prior) {
  if (prior.type != PriorType::K_tapered) throw config_error("build_K: prior variant is not K_tapered");
  require_sizes(prior.sigma2, basis.n_res, "sigma2");
  require_sizes(prior.tau, basis.n_res, "tau");
  require_positive(prior.sigma2, "sigma2");
  require_positive(prior.tau, "tau");
  if (!(prior.taper_multiplier > 0.0)) throw domain_error("prior: taper_multiplier must be > 0");
  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 1; k <= basis.n_res; ++k) {
    const auto members = basis.resolution_members(k);
    const double s2 = prior.sigma2[k - 1];
    const double tau = prior.tau[k - 1];
    const double beta = prior.taper_length(basis, k);
    for (int i : members) {
      for (int j : members) {
        const double d = dist(basis.functions[i], basis.functions[j]);
        const double t = spherical_taper(d, beta);
        if (t > 0.0) trips.emplace_back(i, j, s2 * std::exp(-d / tau) * t);
      }
    }
  }
  return from_triplets(basis.n_spatial(), trips);
}

SpMat build_Q_leroux(const BasisSet& basis, const CoefPrior& prior) {
  if (prior.type != PriorType::Q_leroux) throw config_error("build_Q_leroux: prior variant is not Q_leroux");
  if (!basis.regular) {
    throw config_error("Q_leroux needs a regular lattice basis; use the Q_dist variant for irregular bases");
  }
  require_sizes(prior.kappa, basis.n_res, "kappa");
  require_sizes(prior.rho, basis.n_res, "rho");
  require_positive(prior.kappa, "kappa");
  require_nonneg(prior.rho, "rho");
  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 1; k <= basis.n_res; ++k) {
    std::map<std::pair<int, int>, int> at;
    for (int l : basis.resolution_members(k)) at[{basis.functions[l].row, basis.functions[l].col}] = l;
    const double kappa = prior.kappa[k - 1];
    const double rho = prior.rho[k - 1];
    for (const auto& [rc, i] : at) {
      int count = 0;
      const std::pair<int, int> nbrs[] = {{rc.first - 1, rc.second}, {rc.first + 1, rc.second},
                                          {rc.first, rc.second - 1}, {rc.first, rc.second + 1}};
      for (const auto& n : nbrs) {
        auto it = at.find(n);
        if (it == at.end()) continue;
        ++count;
        if (rho != 0.0) trips.emplace_back(i, it->second, -rho);
      }
      trips.emplace_back(i, i, kappa + rho * count);
    }
  }
  return from_triplets(basis.n_spatial(), trips);
}

SpMat build_Q_dist(const BasisSet& basis, const CoefPrior& prior) {
  if (prior.type != PriorType::Q_dist) throw config_error("build_Q_dist: prior variant is not Q_dist");
  require_sizes(prior.kappa, basis.n_res, "kappa");
  require_sizes(prior.rho, basis.n_res, "rho");
  require_sizes(prior.tau, basis.n_res, "tau");
  require_positive(prior.kappa, "kappa");
  require_nonneg(prior.rho, "rho");
  require_positive(prior.tau, "tau");
  if (!(prior.taper_multiplier > 0.0)) throw domain_error("prior: taper_multiplier must be > 0");
  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 1; k <= basis.n_res; ++k) {
    const auto members = basis.resolution_members(k);
    const double kappa = prior.kappa[k - 1];
    const double rho = prior.rho[k - 1];
    const double tau = prior.tau[k - 1];
    const double beta = prior.taper_length(basis, k);
    for (int i : members) {
      double off_sum = 0.0;
      for (int j : members) {
        if (j == i) continue;
        const double d = dist(basis.functions[i], basis.functions[j]);
        const double t = spherical_taper(d, beta);
        if (t <= 0.0 || rho == 0.0) continue;
        const double v = -rho * std::exp(-d / tau) * t;
        trips.emplace_back(i, j, v);
        off_sum += v;
      }
      trips.emplace_back(i, i, kappa - off_sum);
    }
  }
  return from_triplets(basis.n_spatial(), trips);
}

SpMat ar1_precision(int n, double rho_t) {
  if (!(std::abs(rho_t) < 1.0)) throw domain_error("prior: temporal AR(1) coefficient must satisfy |rho_t| < 1");
  if (n < 1) throw config_error("prior: AR(1) precision needs n >= 1");
  const double c = 1.0 / (1.0 - rho_t * rho_t);
  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < n; ++i) {
    const bool end = i == 0 || i == n - 1;
    trips.emplace_back(i, i, n == 1 ? 1.0 : c * (end ? 1.0 : 1.0 + rho_t * rho_t));
    if (i + 1 < n && rho_t != 0.0) {
      trips.emplace_back(i, i + 1, -c * rho_t);
      trips.emplace_back(i + 1, i, -c * rho_t);
    }
  }
  return from_triplets(n, trips);
}

SpMat build_Q_spacetime(const SpMat& q_t, const SpMat& q_s) {
  SpMat out;
  out = Eigen::kroneckerProduct(q_t, q_s);
  out.prune(0.0);
  out.makeCompressed();
  return out;
}

SpMat coefficient_precision(const BasisSet& basis, const CoefPrior& prior) {
  SpMat q_s;
  switch (prior.type) {
    case PriorType::Q_leroux:
      q_s = build_Q_leroux(basis, prior);
      break;
    case PriorType::Q_dist:
      q_s = build_Q_dist(basis, prior);
      break;
    case PriorType::K_tapered: {
      const Eigen::MatrixXd k = Eigen::MatrixXd(build_K(basis, prior));
      Eigen::LLT<Eigen::MatrixXd> llt(k);
      if (llt.info() != Eigen::Success) throw numerical_error("prior: tapered covariance K is not positive-definite");
      const Eigen::MatrixXd q = llt.solve(Eigen::MatrixXd::Identity(k.rows(), k.cols()));
      const Eigen::MatrixXd qs = 0.5 * (q + q.transpose());
      q_s = qs.sparseView(1.0, 1e-300);
      q_s.makeCompressed();
      break;
    }
  }
  if (!basis.is_tensor()) return q_s;
  return build_Q_spacetime(ar1_precision(basis.n_temporal(), prior.rho_t), q_s);
}

}  // namespace frk
