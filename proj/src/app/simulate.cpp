#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/SparseCholesky>

#include "frk/app/pipeline.hpp"
#include "frk/covpar.hpp"
#include "frk/error.hpp"

namespace frk::app {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Unit {
  double u, v;
};

Unit unit_coords(const Rect& box, Point p) {
  return {(p.x - box.xmin) / box.width(), (p.y - box.ymin) / box.height()};
}

// Smooth truths built from sums of trigonometric terms.
double poisson_surface(Unit c) {
  return 3.2 + 0.9 * std::sin(kTwoPi * 1.1 * c.u + 0.3) * std::cos(kTwoPi * 0.9 * c.v) +
         0.5 * std::cos(kTwoPi * (2.2 * c.u - 1.7 * c.v)) +
         0.35 * std::sin(kTwoPi * 4.2 * c.u) * std::sin(kTwoPi * 3.8 * c.v);
}

double negbin_surface(Unit c) {
  return 0.2 + 1.3 * std::sin(kTwoPi * 1.2 * c.u + 0.5) * std::cos(kTwoPi * 0.8 * c.v) +
         0.7 * std::cos(kTwoPi * (1.8 * c.u + 1.4 * c.v)) + 0.3 * std::sin(kTwoPi * 3.1 * c.v);
}

double gaussian_surface(Unit c) {
  return 1.0 + std::sin(kTwoPi * c.u) * std::cos(kTwoPi * 0.8 * c.v) + 0.5 * std::cos(kTwoPi * (2.0 * c.u + 1.5 * c.v));
}

// Draws data from the scenario's family at the given supports.
void draw_data(const BauGrid& grid, const std::vector<Support>& geoms, Family f, double psi, const Eigen::VectorXd& mu,
               std::mt19937_64& rng, Simulation& sim) {
  const SupportSet sup = map_supports(grid, geoms);
  const bool size = has_size(f);
  const IncidenceMatrix cz = build_incidence(grid, sup, true, size);
  const Eigen::VectorXd mu_z = cz.weights * mu;
  Eigen::VectorXd k_z;
  if (size) k_z = cz.weights * (*grid.size_params());
  for (std::size_t j = 0; j < geoms.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    DataRow d;
    d.geom = geoms[j];
    d.z = sample_family(f, mu_z[jj], psi, size ? k_z[jj] : std::nan(""), rng);
    if (size) d.k = k_z[jj];
    sim.data.push_back(std::move(d));
  }
  std::vector<bool> observed(static_cast<std::size_t>(grid.size()), false);
  for (const auto& c : sup.bau_index_sets) {
    for (int i : c) observed[static_cast<std::size_t>(i)] = true;
  }
  for (auto& t : sim.truth) t.observed = observed[static_cast<std::size_t>(t.id)];
}

Point uniform_point(const Rect& box, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = box.xmin + box.width() * u(rng);
  return {x, box.ymin + box.height() * u(rng)};
}

}  // namespace

Simulation simulate(const RunConfig& cfg) {
  if (!cfg.seed) throw config_error("config: seed is required for simulate");
  const std::string& sc = cfg.simulate.scenario;
  if (sc.empty()) throw config_error("config: simulate.scenario is required");
  std::mt19937_64 rng(*cfg.seed);
  BauGrid grid = make_grid(cfg);
  const Rect& box = grid.bbox();
  const int n = grid.size();
  Simulation sim;
  Eigen::VectorXd mu(n);
  auto truth_row = [&](int i, double latent, double m) {
    TruthRow t;
    t.id = i;
    t.centre = grid.centroid(i);
    t.t = grid.time_of(i);
    t.latent = latent;
    t.mu = m;
    mu[i] = m;
    return t;
  };

  // independent BAU-level variation, so the truth lies in the fitted model class
  std::normal_distribution<double> nd(0.0, 1.0);
  auto fine_scale = [&] { return cfg.simulate.fine_scale_sd * nd(rng); };

  if (sc == "poisson_point" || sc == "gaussian_point") {
    if (grid.n_time() != 1) throw config_error("config: simulate.scenario " + sc + " needs grid.time_bins = 1");
    const bool pois = sc == "poisson_point";
    for (int i = 0; i < n; ++i) {
      const Unit c = unit_coords(box, grid.centroid(i));
      const double y = (pois ? poisson_surface(c) : gaussian_surface(c)) + fine_scale();
      sim.truth.push_back(truth_row(i, y, pois ? std::exp(y) : y));
    }
    std::vector<Support> geoms;
    for (int j = 0; j < cfg.simulate.m; ++j) geoms.push_back({uniform_point(box, rng), {}});
    const double sd = cfg.simulate.noise_sd;
    draw_data(grid, geoms, pois ? Family::poisson : Family::gaussian, sd * sd, mu, rng, sim);
    return sim;
  }

  if (sc == "negbin_areal") {
    if (grid.n_time() != 1) throw config_error("config: simulate.scenario negbin_areal needs grid.time_bins = 1");
    const double k = cfg.grid.size_param.value_or(50.0);
    grid.set_size_params(Eigen::VectorXd::Constant(n, k));
    for (int i = 0; i < n; ++i) {
      const double y = negbin_surface(unit_coords(box, grid.centroid(i))) + fine_scale();
      const double pi = 1.0 / (1.0 + std::exp(-y));
      TruthRow t = truth_row(i, y, k * (1.0 - pi) / pi);
      t.pi = pi;
      t.k = k;
      sim.truth.push_back(t);
    }
    // Blocks of block x block BAUs: observed whole, observed BAU by BAU, or left empty.
    const int b = cfg.simulate.block;
    const double cw = box.width() / grid.nx(), ch = box.height() / grid.ny();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Support> geoms;
    for (int by = 0; by * b < grid.ny(); ++by) {
      for (int bx = 0; bx * b < grid.nx(); ++bx) {
        const double kind = u(rng);
        const int x1 = std::min(grid.nx(), (bx + 1) * b), y1 = std::min(grid.ny(), (by + 1) * b);
        if (kind < 0.45) {
          // shrink inside the block so the closed rectangle meets no neighbouring cell
          const double eps = 1e-6 * std::min(cw, ch);
          geoms.push_back({Rect{box.xmin + bx * b * cw + eps, box.ymin + by * b * ch + eps, box.xmin + x1 * cw - eps,
                                box.ymin + y1 * ch - eps},
                           {}});
        } else if (kind < 0.8) {
          for (int gy = by * b; gy < y1; ++gy) {
            for (int gx = bx * b; gx < x1; ++gx) {
              if (u(rng) < 0.5) {
                geoms.push_back({Point{box.xmin + (gx + 0.5) * cw, box.ymin + (gy + 0.5) * ch}, {}});
              }
            }
          }
        }
      }
    }
    if (geoms.empty()) throw config_error("config: simulate produced no supports; enlarge the grid");
    draw_data(grid, geoms, Family::negative_binomial, 1.0, mu, rng, sim);
    return sim;
  }

  if (sc == "poisson_spacetime") {
    const int nt = grid.n_time();
    if (nt < 2) throw config_error("config: simulate.scenario poisson_spacetime needs grid.time_bins >= 2");
    const int hold = cfg.simulate.holdout_time.value_or(nt / 2);
    if (hold < 0 || hold >= nt) throw config_error("config: simulate.holdout_time must be a valid time bin");
    // Basis coefficients drawn from the fitted prior class: Leroux in space, AR(1) in time.
    const BasisSet basis = make_basis(cfg, grid);
    CoefPrior prior;
    prior.kappa.assign(static_cast<std::size_t>(basis.n_res), 6.0);
    prior.rho.assign(static_cast<std::size_t>(basis.n_res), 1.0);
    prior.rho_t = 0.7;
    const Eigen::SimplicialLLT<SpMat> llt(coefficient_precision(basis, prior));
    Eigen::VectorXd z(basis.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = nd(rng);
    const Eigen::VectorXd w = llt.matrixU().solve(z);
    const Eigen::VectorXd eta = llt.permutationPinv() * w;
    const Eigen::VectorXd smooth = bau_design(basis, grid) * eta;
    std::uniform_real_distribution<double> var(0.02, 0.15);
    std::vector<double> sd(static_cast<std::size_t>(grid.n_spatial()));
    for (auto& s : sd) s = std::sqrt(var(rng));
    for (int i = 0; i < n; ++i) {
      const double y = 5.0 + smooth[i] + sd[static_cast<std::size_t>(grid.spatial_of(i))] * nd(rng);
      sim.truth.push_back(truth_row(i, y, std::exp(y)));
    }
    std::vector<Support> geoms;
    for (int t = 0; t < nt; ++t) {
      if (t == hold) continue;
      for (int s = 0; s < grid.n_spatial(); ++s) geoms.push_back({grid.cell(s).centre(), t});
    }
    draw_data(grid, geoms, Family::poisson, 1.0, mu, rng, sim);
    return sim;
  }

  throw config_error("config: unknown simulate.scenario '" + sc +
                     "' (expected poisson_point, negbin_areal, gaussian_point or poisson_spacetime)");
}

}  // namespace frk::app
