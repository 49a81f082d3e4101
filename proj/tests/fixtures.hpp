#pragma once

// Small random model instances shared by the unit and acceptance tests.

#include <cmath>
#include <optional>
#include <random>

#include "frk/basis.hpp"
#include "frk/error.hpp"
#include "frk/family.hpp"
#include "frk/geometry.hpp"
#include "frk/model.hpp"

namespace fixture {

/// Kind of the frk::Error thrown by `f`, if any.
template <class F>
std::optional<frk::ErrorKind> thrown_kind(F&& f) {
  try {
    f();
  } catch (const frk::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

struct Instance {
  frk::ModelStructures s;
  frk::ModelState theta;
};

inline frk::ModelState default_state(const frk::ModelStructures& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  frk::ModelState th;
  th.alpha = Eigen::VectorXd::Constant(s.n_covariates(), 0.0);
  th.prior.type = s.spec().prior;
  th.prior.taper_multiplier = s.spec().taper_multiplier;
  const int nr = s.basis().n_res;
  for (int k = 0; k < nr; ++k) {
    th.prior.sigma2.push_back(0.5 + u(rng));
    th.prior.tau.push_back(s.basis().mindist[static_cast<std::size_t>(k)] * (0.5 + u(rng)));
    th.prior.kappa.push_back(0.5 + u(rng));
    th.prior.rho.push_back(0.2 + u(rng));
  }
  th.prior.rho_t = 0.3;
  th.sigma2fs = Eigen::VectorXd::Constant(1, 0.05 + 0.2 * u(rng));
  th.psi = 0.2 + 0.5 * u(rng);
  return th;
}

/// Value of the latent process that keeps each family's mean comfortably inside its domain.
inline double typical_latent(frk::Family f, frk::Link l) {
  using frk::Link;
  switch (l) {
    case Link::identity: return f == frk::Family::gaussian ? 0.0 : 4.0;
    case Link::inverse: return 0.5;
    case Link::sqrt: return 2.0;
    case Link::log: return 1.0;
    default: return 0.0;
  }
}

/// A random instance: nx x ny grid, mixed point and rectangle supports, one- or
/// two-resolution basis, data drawn near the family's typical mean.
inline Instance random_instance(std::mt19937_64& rng, frk::Family fam, frk::Link link, int nx, int ny, int n_res,
                                int m, frk::PriorType prior = frk::PriorType::Q_leroux) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const frk::Rect box{0.0, 0.0, 1.0, 1.0};
  frk::BauGrid grid = frk::build_bau_grid(box, nx, ny, 1);
  Eigen::MatrixXd t(grid.size(), 2);
  for (int i = 0; i < grid.size(); ++i) t.row(i) << 1.0, grid.centroid(i).x - 0.5;
  grid.set_covariates(t);
  Eigen::VectorXd k(grid.size());
  for (int i = 0; i < grid.size(); ++i) k[i] = 3.0 + std::floor(8.0 * u(rng));
  grid.set_size_params(k);

  std::vector<frk::Support> geoms;
  for (int j = 0; j < m; ++j) {
    const double x = u(rng);
    const double y = u(rng);
    if (j % 3 == 2) {
      geoms.push_back({frk::Rect{x, y, std::min(1.0, x + 0.3 * u(rng)), std::min(1.0, y + 0.3 * u(rng))}, {}});
    } else {
      geoms.push_back({frk::Point{x, y}, {}});
    }
  }
  frk::SupportSet sup = frk::map_supports(grid, geoms);
  const frk::IncidenceMatrix cz = frk::build_incidence(grid, sup, true, frk::has_size(fam));
  const double y0 = typical_latent(fam, link);
  Eigen::VectorXd z(m);
  for (int j = 0; j < m; ++j) {
    double kz = 0.0;
    for (frk::SpMatRow::InnerIterator it(cz.weights, j); it; ++it) kz += it.value() * k[it.col()];
    double mu = 0.0;
    for (frk::SpMatRow::InnerIterator it(cz.weights, j); it; ++it) {
      mu += it.value() * frk::mean_from_latent(y0 + 0.3 * (u(rng) - 0.5), link, fam, k[it.col()]).mu;
    }
    double zj = frk::sample_family(fam, mu, 0.3, kz, rng);
    if (fam == frk::Family::gamma || fam == frk::Family::inverse_gaussian) zj = std::max(zj, 1e-3);
    z[j] = zj;
  }
  frk::ModelSpec spec;
  spec.family = fam;
  spec.link = link;
  spec.prior = prior;
  frk::ModelStructures s(std::move(grid), frk::auto_basis(box, n_res), {z, std::move(sup)}, spec);
  frk::ModelState th = default_state(s, rng);
  th.alpha[0] = y0;
  return {std::move(s), std::move(th)};
}

}  // namespace fixture
