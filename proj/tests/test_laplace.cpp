#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "frk/error.hpp"
#include "frk/laplace.hpp"
#include "oracles.hpp"

using namespace frk;

namespace {

const Family kFamilies[] = {Family::gaussian,          Family::poisson,  Family::gamma, Family::inverse_gaussian,
                            Family::negative_binomial, Family::binomial};
const Link kLinks[] = {Link::identity, Link::inverse, Link::log, Link::sqrt, Link::logit, Link::probit, Link::cloglog};

Eigen::VectorXd small_u(std::mt19937_64& rng, int p, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::VectorXd u(p);
  for (int i = 0; i < p; ++i) u[i] = n(rng);
  return u;
}

}  // namespace

TEST_CASE("complete log-likelihood at zero for Gaussian data") {
  std::mt19937_64 rng(1);
  auto inst = fixture::random_instance(rng, Family::gaussian, Link::identity, 5, 4, 1, 12);
  auto& th = inst.theta;
  th.alpha.setZero();
  const auto& s = inst.s;
  const Eigen::VectorXd u = Eigen::VectorXd::Zero(s.n_random());
  const PriorTerms pt = prior_terms(s, th);
  double expect = 0.0;
  for (int j = 0; j < s.n_obs(); ++j) {
    expect += -0.5 * std::log(2 * std::numbers::pi * th.psi) - s.z()[j] * s.z()[j] / (2 * th.psi);
  }
  expect += 0.5 * pt.logdet_q - 0.5 * s.n_basis() * oracle::kLog2Pi;
  for (int a = 0; a < s.n_touched(); ++a) expect += -0.5 * std::log(2 * std::numbers::pi * pt.fs_var[a]);
  CHECK(complete_loglik(s, th, u) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("complete log-likelihood matches the dense oracle") {
  std::mt19937_64 rng(2);
  for (Family f : kFamilies) {
    for (Link l : kLinks) {
      if (validate_combination(f, l) == Combination::forbidden) continue;
      auto inst = fixture::random_instance(rng, f, l, 5, 4, 1, 10);
      const Eigen::VectorXd u = small_u(rng, inst.s.n_random(), 0.05);
      const double a = complete_loglik(inst.s, inst.theta, u);
      const double b = oracle::dense_complete_loglik(inst.s, inst.theta, u);
      CHECK(std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(b)));
    }
  }
}

TEST_CASE("out-of-domain mean gives -inf") {
  std::mt19937_64 rng(3);
  auto inst = fixture::random_instance(rng, Family::poisson, Link::sqrt, 4, 4, 1, 8);
  inst.theta.alpha.setZero();
  // sqrt link with Y = 0 everywhere gives mu = 0, outside the Poisson mean domain.
  const Eigen::VectorXd u = Eigen::VectorXd::Zero(inst.s.n_random());
  CHECK(std::isinf(complete_loglik(inst.s, inst.theta, u)));
}

TEST_CASE("analytic gradient matches finite differences for every allowed pair") {
  std::mt19937_64 rng(4);
  for (Family f : kFamilies) {
    for (Link l : kLinks) {
      if (validate_combination(f, l) == Combination::forbidden) continue;
      auto inst = fixture::random_instance(rng, f, l, 4, 4, 1, 10);
      const auto& s = inst.s;
      const PriorTerms pt = prior_terms(s, inst.theta);
      for (int rep = 0; rep < 10; ++rep) {
        const Eigen::VectorXd u = small_u(rng, s.n_random(), 0.05);
        const Eigen::VectorXd g = complete_loglik_gradient(s, inst.theta, u);
        for (int i = 0; i < s.n_random(); ++i) {
          const double h = 1e-5;
          Eigen::VectorXd up = u, um = u;
          up[i] += h;
          um[i] -= h;
          const double fd = (complete_loglik(s, inst.theta, pt, up) - complete_loglik(s, inst.theta, pt, um)) / (2 * h);
          CHECK(std::abs(g[i] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
        }
      }
    }
  }
}

TEST_CASE("analytic Hessian matches finite differences of the gradient") {
  std::mt19937_64 rng(5);
  for (Family f : kFamilies) {
    for (Link l : kLinks) {
      if (validate_combination(f, l) == Combination::forbidden) continue;
      auto inst = fixture::random_instance(rng, f, l, 4, 3, 1, 8);
      const auto& s = inst.s;
      const Eigen::VectorXd u = small_u(rng, s.n_random(), 0.05);
      const Eigen::MatrixXd h = Eigen::MatrixXd(complete_loglik_neg_hessian(s, inst.theta, u));
      CHECK((h - h.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, h.cwiseAbs().maxCoeff()));
      for (int i = 0; i < s.n_random(); ++i) {
        const double e = 1e-5;
        Eigen::VectorXd up = u, um = u;
        up[i] += e;
        um[i] -= e;
        const Eigen::VectorXd col =
            -(complete_loglik_gradient(s, inst.theta, up) - complete_loglik_gradient(s, inst.theta, um)) / (2 * e);
        for (int j = 0; j < s.n_random(); ++j) {
          CHECK(std::abs(h(j, i) - col[j]) <= 1e-5 * std::max(1.0, std::abs(col[j])));
        }
      }
    }
  }
}

TEST_CASE("Hessian sparsity follows the block structure") {
  std::mt19937_64 rng(6);
  auto inst = fixture::random_instance(rng, Family::poisson, Link::log, 6, 6, 2, 30);
  const auto& s = inst.s;
  const Eigen::VectorXd u = small_u(rng, s.n_random(), 0.05);
  const Eigen::MatrixXd h = Eigen::MatrixXd(complete_loglik_neg_hessian(s, inst.theta, u));
  // Pattern bound: [S I]^T |C|^T |C| [S I] + blkdiag(Q, I).
  const Eigen::MatrixXd b = Eigen::MatrixXd(s.effects_design()).cwiseAbs();
  const Eigen::MatrixXd c = Eigen::MatrixXd(s.cz_touched()).cwiseAbs();
  Eigen::MatrixXd bound = b.transpose() * c.transpose() * c * b;
  const int r = s.n_basis();
  bound.topLeftCorner(r, r) += Eigen::MatrixXd(prior_terms(s, inst.theta).q).cwiseAbs();
  bound.diagonal().array() += 1.0;
  for (int i = 0; i < h.rows(); ++i) {
    for (int j = 0; j < h.cols(); ++j) {
      if (h(i, j) != 0.0) CHECK(bound(i, j) != 0.0);
    }
  }
}

TEST_CASE("Gaussian instances: Laplace is exact and the mode is the posterior mean") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 6; ++rep) {
    auto inst = fixture::random_instance(rng, Family::gaussian, Link::identity, 8 + rep, 6, 1, 25 + 5 * rep);
    const auto& s = inst.s;
    const LaplaceResult lr = laplace_objective(s, inst.theta);
    const double exact = oracle::gaussian_marginal_loglik(s, inst.theta);
    CHECK(std::abs(lr.loglik - exact) <= 1e-8 * std::abs(exact));
    CHECK(lr.grad_norm < 1e-8);
    // the mode of u maps to the conditional mean of Y on touched BAUs
    const auto [mean, sd] = oracle::gaussian_posterior_y(s, inst.theta);
    const Eigen::VectorXd y = latent_touched(s, inst.theta, lr.u_hat);
    for (int a = 0; a < s.n_touched(); ++a) {
      CHECK(std::abs(y[a] - mean[s.touched()[static_cast<std::size_t>(a)]]) <= 1e-8 * std::max(1.0, std::abs(y[a])));
    }
  }
}

TEST_CASE("Gaussian data with huge noise leaves the prior mode") {
  std::mt19937_64 rng(8);
  auto inst = fixture::random_instance(rng, Family::gaussian, Link::identity, 6, 6, 1, 20);
  inst.theta.psi = 1e12;
  const LaplaceResult lr = laplace_objective(inst.s, inst.theta);
  CHECK(lr.u_hat.cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("non-Gaussian modes satisfy the convergence contract") {
  std::mt19937_64 rng(9);
  for (Family f : kFamilies) {
    for (Link l : kLinks) {
      if (validate_combination(f, l) != Combination::ok) continue;
      auto inst = fixture::random_instance(rng, f, l, 6, 5, 1, 20);
      const LaplaceResult lr = laplace_objective(inst.s, inst.theta);
      CHECK(lr.grad_norm < 1e-8);
      CHECK(std::isfinite(lr.loglik));
      CHECK(lr.hess_factor);
      // warm start at the mode returns immediately
      const LaplaceResult again = laplace_objective(inst.s, inst.theta, lr.u_hat);
      CHECK(again.iterations == 0);
      CHECK(again.loglik == lr.loglik);
    }
  }
}

TEST_CASE("no random effects reduces to the data log-likelihood") {
  std::mt19937_64 rng(10);
  BauGrid grid = build_bau_grid({0, 0, 1, 1}, 4, 4, 1);
  std::vector<Support> geoms;
  Eigen::VectorXd z(6);
  for (int j = 0; j < 6; ++j) {
    geoms.push_back({Point{0.1 + 0.15 * j, 0.5}, {}});
    z[j] = j;
  }
  ModelSpec spec;
  spec.family = Family::poisson;
  spec.link = Link::log;
  spec.fine_scale = false;
  ModelStructures s(grid, BasisSet{}, {z, map_supports(grid, geoms)}, spec);
  ModelState th;
  th.alpha = Eigen::VectorXd::Constant(1, 0.4);
  th.sigma2fs = Eigen::VectorXd::Constant(1, 1.0);
  CHECK(s.n_random() == 0);
  const LaplaceResult lr = laplace_objective(s, th);
  double expect = 0.0;
  for (int j = 0; j < 6; ++j) expect += log_density(Family::poisson, z[j], std::exp(0.4), 1, NAN).value;
  CHECK(lr.loglik == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("Laplace value drops far from sensible parameters") {
  std::mt19937_64 rng(11);
  auto inst = fixture::random_instance(rng, Family::poisson, Link::log, 8, 8, 1, 40);
  const double base = laplace_objective(inst.s, inst.theta).loglik;
  ModelState far = inst.theta;
  far.prior.kappa[0] = 1e-4;
  far.sigma2fs[0] = 50.0;
  CHECK(laplace_objective(inst.s, far).loglik < base);
}

TEST_CASE("Laplace log-determinant agrees with a dense factorization of the observed information") {
  std::mt19937_64 rng(23);
  const PriorType priors[] = {PriorType::Q_leroux, PriorType::Q_dist, PriorType::K_tapered};
  int checked = 0;
  for (Family f : kFamilies) {
    for (Link l : kLinks) {
      if (validate_combination(f, l) != Combination::ok) continue;
      const PriorType prior = priors[checked % 3];
      auto inst = fixture::random_instance(rng, f, l, 6, 5, 2, 25, prior);
      const LaplaceResult lr = laplace_objective(inst.s, inst.theta);
      const Eigen::MatrixXd h = Eigen::MatrixXd(complete_loglik_neg_hessian(inst.s, inst.theta, lr.u_hat));
      const Eigen::LLT<Eigen::MatrixXd> llt(h);
      REQUIRE(llt.info() == Eigen::Success);
      const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
      const double p = static_cast<double>(inst.s.n_random());
      const double expect = lr.complete + 0.5 * p * std::log(2.0 * std::numbers::pi) - 0.5 * logdet;
      CHECK(lr.loglik == doctest::Approx(expect).epsilon(1e-10));
      ++checked;
    }
  }
  CHECK(checked >= 10);
}
