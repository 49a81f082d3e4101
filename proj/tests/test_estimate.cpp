#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "frk/error.hpp"
#include "frk/estimate.hpp"

using namespace frk;

namespace {

SupportSet supports_of(const BauGrid& grid, const std::vector<Support>& geoms) { return map_supports(grid, geoms); }

struct GaussianTruth {
  double sigma2 = 1.0;
  double tau_scale = 1.0;  // tau = tau_scale * mindist
  double sigma2fs = 0.1;
  double psi = 0.05;
};

// One point datum per BAU of a 10 x 10 grid, simulated from the K_tapered model.
ModelStructures simulate_gaussian(std::mt19937_64& rng, const GaussianTruth& tr, ModelState& truth) {
  const Rect box{0.0, 0.0, 1.0, 1.0};
  BauGrid grid = build_bau_grid(box, 10, 10, 1);
  BasisSet basis = auto_basis(box, 1);
  truth = ModelState{};
  truth.alpha = Eigen::VectorXd::Constant(1, 2.0);
  truth.prior.type = PriorType::K_tapered;
  truth.prior.sigma2 = {tr.sigma2};
  truth.prior.tau = {tr.tau_scale * basis.mindist[0]};
  truth.sigma2fs = Eigen::VectorXd::Constant(1, tr.sigma2fs);
  truth.psi = tr.psi;

  const Eigen::MatrixXd k = Eigen::MatrixXd(build_K(basis, truth.prior));
  const Eigen::MatrixXd lk = k.llt().matrixL();
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd w(basis.size());
  for (int i = 0; i < basis.size(); ++i) w[i] = nd(rng);
  const Eigen::VectorXd eta = lk * w;
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(grid.size(), 2.0) + bau_design(basis, grid) * eta;

  std::vector<Support> geoms;
  Eigen::VectorXd z(grid.size());
  for (int i = 0; i < grid.size(); ++i) {
    geoms.push_back({BauList{{i}}, {}});
    z[i] = y[i] + std::sqrt(tr.sigma2fs) * nd(rng) + std::sqrt(tr.psi) * nd(rng);
  }
  SupportSet sup = supports_of(grid, geoms);
  ModelSpec spec;
  spec.prior = PriorType::K_tapered;
  return ModelStructures(std::move(grid), std::move(basis), {z, std::move(sup)}, spec);
}

// Marginal variance of Y averaged over BAUs, and the distance at which the mean
// correlation of the smooth part S eta first drops below 1/e.
std::pair<double, double> process_scales(const ModelStructures& s, const ModelState& th) {
  const Eigen::MatrixXd sd = Eigen::MatrixXd(s.s_full());
  const Eigen::MatrixXd k = Eigen::MatrixXd(build_K(s.basis(), th.prior));
  const Eigen::MatrixXd c = sd * k * sd.transpose();
  const double total = c.diagonal().mean() + th.sigma2fs[0];
  const int n = static_cast<int>(c.rows());
  const double h = 0.05;
  std::vector<double> sum(40, 0.0), cnt(40, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Point a = s.grid().centroid(i), b = s.grid().centroid(j);
      const auto bin = static_cast<std::size_t>(std::hypot(a.x - b.x, a.y - b.y) / h);
      if (bin >= sum.size()) continue;
      sum[bin] += c(i, j) / std::sqrt(c(i, i) * c(j, j));
      cnt[bin] += 1.0;
    }
  }
  double prev_d = 0.0, prev_r = 1.0;
  for (std::size_t b = 0; b < sum.size(); ++b) {
    if (cnt[b] == 0.0) continue;
    const double d = (static_cast<double>(b) + 0.5) * h;
    const double r = sum[b] / cnt[b];
    if (r < std::exp(-1.0)) return {total, prev_d + (prev_r - std::exp(-1.0)) / (prev_r - r) * (d - prev_d)};
    prev_d = d;
    prev_r = r;
  }
  return {total, prev_d};
}

}  // namespace

TEST_CASE("resolve_sigma2fs rule") {
  SupportSet multi;
  multi.bau_index_sets = {{0, 1}, {2, 3, 4}};
  SupportSet mixed;
  mixed.bau_index_sets = {{0, 1}, {7}};

  const Sigma2fsRule a = resolve_sigma2fs(multi, std::nullopt, 2.0);
  CHECK(a.fixed);
  CHECK(a.rough);
  CHECK(a.value == doctest::Approx(0.2));

  const Sigma2fsRule b = resolve_sigma2fs(mixed, std::nullopt, 2.0);
  CHECK_FALSE(b.fixed);

  const Sigma2fsRule c = resolve_sigma2fs(multi, 1.0, 2.0);
  CHECK(c.fixed);
  CHECK_FALSE(c.rough);
  CHECK(c.value == 1.0);
  CHECK(resolve_sigma2fs(mixed, 1.0, 2.0).value == 1.0);

  CHECK(fixture::thrown_kind([&] { resolve_sigma2fs(mixed, -1.0, 2.0); }) == ErrorKind::domain);
}

TEST_CASE("expand_fs_variances examples") {
  const Rect box{0.0, 0.0, 2.0, 1.0};
  const BauGrid st = build_bau_grid(box, 2, 1, 3);
  const Eigen::VectorXd v = expand_fs_variances(st, true, Eigen::Vector2d(1.0, 4.0));
  Eigen::VectorXd expect(6);
  expect << 1, 4, 1, 4, 1, 4;
  CHECK(v == expect);

  const BauGrid sp = build_bau_grid(box, 2, 1, 1);
  CHECK(expand_fs_variances(sp, false, Eigen::VectorXd::Constant(1, 1.0)) == Eigen::VectorXd::Ones(2));
  CHECK(fixture::thrown_kind([&] { expand_fs_variances(sp, true, Eigen::Vector2d(1.0, 4.0)); }) == ErrorKind::config);

  BauGrid scaled = build_bau_grid(box, 2, 1, 1);
  scaled.set_fs_scale(Eigen::VectorXd::Constant(2, 2.0));
  CHECK(expand_fs_variances(scaled, false, Eigen::VectorXd::Constant(1, 1.0)) == Eigen::VectorXd::Constant(2, 2.0));
}

TEST_CASE("codec round trip and transforms") {
  std::mt19937_64 rng(11);
  for (PriorType pt : {PriorType::K_tapered, PriorType::Q_leroux, PriorType::Q_dist}) {
    auto inst = fixture::random_instance(rng, Family::gamma, Link::log, 6, 5, 2, 20, pt);
    const ThetaCodec codec(inst.s, inst.theta, FitOptions{}, false);
    const Eigen::VectorXd x = codec.encode_all(inst.theta);
    const ModelState back = codec.decode_all(x);
    CHECK((back.alpha - inst.theta.alpha).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(std::abs(back.psi - inst.theta.psi) < 1e-14);
    CHECK(std::abs(back.sigma2fs[0] - inst.theta.sigma2fs[0]) < 1e-14);
    const auto& p = codec.params();
    REQUIRE(p.size() == static_cast<std::size_t>(x.size()));
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i].name.rfind("alpha", 0) == 0) CHECK(p[i].transform == Transform::identity);
      else CHECK(p[i].transform == Transform::log);
    }
    // any transformed vector decodes to a valid state
    Eigen::VectorXd y = x;
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += (i % 2 ? -3.0 : 3.0);
    const ModelState far = codec.decode_all(y);
    CHECK(std::isfinite(laplace_objective(inst.s, far, std::nullopt, {}).loglik));
  }
}

TEST_CASE("fixing every parameter returns theta after one evaluation") {
  std::mt19937_64 rng(12);
  auto inst = fixture::random_instance(rng, Family::poisson, Link::log, 6, 5, 1, 20);
  FitOptions o;
  o.start = inst.theta;
  o.fix_alpha = o.fix_prior = o.fix_rho_t = o.fix_sigma2fs = o.fix_psi = true;
  const FitResult r = fit(inst.s, o);
  CHECK(r.report.evaluations == 1);
  CHECK(r.report.converged);
  CHECK(r.theta.alpha == inst.theta.alpha);
  CHECK(r.theta.prior.kappa == inst.theta.prior.kappa);
  CHECK(r.theta.prior.rho == inst.theta.prior.rho);
  CHECK(r.theta.sigma2fs == inst.theta.sigma2fs);
  CHECK(r.laplace.loglik == laplace_objective(inst.s, inst.theta, std::nullopt, {}).loglik);
}

TEST_CASE("forbidden family/link is rejected") {
  std::mt19937_64 rng(13);
  auto inst = fixture::random_instance(rng, Family::poisson, Link::log, 4, 4, 1, 10);
  ModelSpec spec = inst.s.spec();
  spec.link = Link::logit;
  ModelStructures bad(inst.s.grid(), inst.s.basis(), {inst.s.z(), inst.s.supports()}, spec);
  CHECK(fixture::thrown_kind([&] { fit(bad); }) == ErrorKind::config);
}

TEST_CASE("rough fine-scale variance when no support is a single BAU") {
  std::mt19937_64 rng(14);
  const Rect box{0.0, 0.0, 1.0, 1.0};
  BauGrid grid = build_bau_grid(box, 8, 8, 1);
  std::vector<Support> geoms;
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int j = 0; j < 16; ++j) {
    const double x = 0.25 * (j % 4);
    const double y = 0.25 * (j / 4);
    geoms.push_back({Rect{x + 0.01, y + 0.01, x + 0.24, y + 0.24}, {}});
  }
  SupportSet sup = map_supports(grid, geoms);
  Eigen::VectorXd z(16);
  for (int j = 0; j < 16; ++j) z[j] = 1.0 + nd(rng);
  ModelStructures s(std::move(grid), auto_basis(box, 1), {z, std::move(sup)}, ModelSpec{});
  const FitResult r = fit(s);
  CHECK(r.report.sigma2fs.fixed);
  CHECK(r.report.sigma2fs.rough);
  CHECK(r.theta.sigma2fs[0] == doctest::Approx(0.1 * r.report.resid_var));
  bool flagged = false;
  for (const auto& w : r.report.warnings) flagged |= w.find("rough") != std::string::npos;
  CHECK(flagged);
  for (const auto& p : r.report.params) {
    if (p.name.rfind("sigma2fs", 0) == 0) CHECK(p.fixed);
  }
}

TEST_CASE("fit improves the objective monotonically and satisfies KKT") {
  std::mt19937_64 rng(15);
  const std::pair<Family, Link> cases[] = {{Family::gaussian, Link::identity},
                                           {Family::poisson, Link::log},
                                           {Family::binomial, Link::logit},
                                           {Family::gamma, Link::log}};
  for (auto [f, l] : cases) {
    CAPTURE(to_string(f));
    auto inst = fixture::random_instance(rng, f, l, 8, 8, 1, 60);
    const FitResult r = fit(inst.s);
    REQUIRE(r.report.converged);
    const auto& tr = r.report.trace;
    for (std::size_t i = 1; i < tr.size(); ++i) CHECK(tr[i] >= tr[i - 1]);
    CHECK(tr.back() >= tr.front());

    // reparameterisation consistency: the objective through the codec equals the direct one
    const ThetaCodec codec(inst.s, r.theta, FitOptions{}, r.report.sigma2fs.fixed);
    const ModelState round = codec.decode_all(codec.encode_all(r.theta));
    const double direct = laplace_objective(inst.s, r.theta, std::nullopt, {}).loglik;
    const double via = laplace_objective(inst.s, round, std::nullopt, {}).loglik;
    CHECK(std::abs(direct - via) <= 1e-10 * std::max(1.0, std::abs(direct)));
    CHECK(std::abs(direct - r.laplace.loglik) <= 1e-8 * std::max(1.0, std::abs(direct)));

    // KKT: fresh finite-difference gradient at the optimum
    const LaplaceResult at = laplace_objective(inst.s, r.theta, std::nullopt, {});
    const Eigen::VectorXd g = outer_gradient(inst.s, codec, r.theta, at, FitOptions{});
    CHECK(g.cwiseAbs().maxCoeff() < 5e-3);
  }
}

TEST_CASE("Gaussian simulation recovery") {
  std::mt19937_64 rng(19);
  const GaussianTruth tr;
  const int reps = 20;
  double tv_ratio = 0.0;
  double len_ratio = 0.0;
  for (int rep = 0; rep < reps; ++rep) {
    ModelState truth;
    const ModelStructures s = simulate_gaussian(rng, tr, truth);
    FitOptions o;
    ModelState start = initial_state(s, moment_fit(s), Sigma2fsRule{});
    start.psi = tr.psi;
    o.start = start;
    o.fix_psi = true;
    const FitResult r = fit(s, o);
    CHECK(r.report.converged);
    const auto [tv_true, len_true] = process_scales(s, truth);
    const auto [tv_hat, len_hat] = process_scales(s, r.theta);
    tv_ratio += tv_hat / tv_true;
    len_ratio += len_hat / len_true;
  }
  tv_ratio /= reps;
  len_ratio /= reps;
  MESSAGE("mean total-variance ratio " << tv_ratio << ", mean correlation-range ratio " << len_ratio);
  CHECK(std::abs(tv_ratio - 1.0) < 0.3);
  CHECK(std::abs(len_ratio - 1.0) < 0.3);
}
