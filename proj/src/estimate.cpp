#include "frk/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "frk/error.hpp"
#include "frk/kernels.hpp"

namespace frk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double forward(Transform t, double v) {
  switch (t) {
    case Transform::identity: return v;
    case Transform::log: return std::log(v);
    case Transform::atanh: return std::atanh(v);
  }
  return v;
}

double backward(Transform t, double x) {
  switch (t) {
    case Transform::identity: return x;
    case Transform::log: return std::exp(x);
    case Transform::atanh: return std::tanh(x);
  }
  return x;
}

// Link-scale pseudo-value of one datum, nudged into the link's domain.
double datum_latent(const ModelStructures& s, int j, double row_weight) {
  const auto& spec = s.spec();
  const double z = s.z()[j];
  if (has_size(spec.family)) {
    const double kz = s.k_obs_support()[j];
    if (spec.family == Family::binomial) return link_fn(spec.link, (z + 0.5) / (kz + 1.0));
    const double ratio = (z + 0.5) / std::max(kz, 1e-8);  // mu / k
    if (is_probability_link(spec.link)) return link_fn(spec.link, 1.0 / (1.0 + ratio));
    return link_fn(spec.link, ratio);
  }
  double mu = (spec.family == Family::poisson ? z + 0.5 : z) / row_weight;
  switch (spec.link) {
    case Link::log: mu = std::max(mu, 1e-3); break;
    case Link::sqrt: mu = std::max(mu, 0.0); break;
    case Link::inverse:
      if (std::abs(mu) < 1e-3) mu = std::copysign(1e-3, mu);
      break;
    default: break;
  }
  return link_fn(spec.link, mu);
}

double variance_function(Family f, double mu) {
  switch (f) {
    case Family::gamma: return mu * mu;
    case Family::inverse_gaussian: return mu * mu * mu;
    default: return 1.0;
  }
}

struct GlmEval {
  double loglik = -kInf;
  Eigen::VectorXd mu_z;
  Eigen::VectorXd grad;
  Eigen::MatrixXd info;
};

// Data log-likelihood of alpha with every random effect at zero; psi held at 1.
GlmEval glm_eval(const ModelStructures& s, const Eigen::VectorXd& alpha, bool derivs) {
  const auto& spec = s.spec();
  const Eigen::VectorXd y = s.t_touched() * alpha;
  const Eigen::Index nt = y.size();
  Eigen::VectorXd mu(nt), dmu(nt);
  for (Eigen::Index a = 0; a < nt; ++a) {
    const Deriv2 m = mean_derivs(y[a], spec.link, spec.family, s.k_touched()[a]);
    mu[a] = m.value;
    dmu[a] = m.d1;
  }
  GlmEval e;
  e.mu_z = s.cz_touched() * mu;
  const int m = s.n_obs();
  Eigen::VectorXd d1(m), w(m);
  double ll = 0.0;
  for (int j = 0; j < m; ++j) {
    const Deriv2 ld = log_density(spec.family, s.z()[j], e.mu_z[j], 1.0, s.k_obs_support()[j]);
    if (!std::isfinite(ld.value)) return e;
    ll += ld.value;
    d1[j] = ld.d1;
    w[j] = fisher_information(spec.family, e.mu_z[j], 1.0, s.k_obs_support()[j]);
  }
  e.loglik = ll;
  if (derivs) {
    const Eigen::MatrixXd jac = s.cz_touched() * (dmu.asDiagonal() * s.t_touched());
    e.grad = jac.transpose() * d1;
    e.info = jac.transpose() * w.asDiagonal() * jac;
  }
  return e;
}

}  // namespace

Sigma2fsRule resolve_sigma2fs(const SupportSet& supports, std::optional<double> user, double resid_var) {
  Sigma2fsRule r;
  if (user) {
    if (!(*user > 0.0) || !std::isfinite(*user)) {
      throw domain_error("known_sigma2fs must be a positive number (got " + std::to_string(*user) + ")");
    }
    r.fixed = true;
    r.value = *user;
    return r;
  }
  const bool any_single =
      std::any_of(supports.bau_index_sets.begin(), supports.bau_index_sets.end(),
                  [](const std::vector<int>& c) { return c.size() == 1; });
  if (!any_single) {
    r.fixed = true;
    r.rough = true;
    r.value = 0.1 * resid_var;
  }
  return r;
}

MomentFit moment_fit(const ModelStructures& s) {
  const int m = s.n_obs();
  const int q = s.n_covariates();
  const Eigen::VectorXd row_w = s.cz_touched() * Eigen::VectorXd::Ones(s.n_touched());
  Eigen::VectorXd ytilde(m);
  for (int j = 0; j < m; ++j) ytilde[j] = datum_latent(s, j, s.cz().normalised ? 1.0 : row_w[j]);
  // support-averaged covariates
  Eigen::MatrixXd tbar = s.cz_touched() * s.t_touched();
  for (int j = 0; j < m; ++j) tbar.row(j) /= row_w[j];

  MomentFit mf;
  mf.alpha = tbar.colPivHouseholderQr().solve(ytilde);
  if (!mf.alpha.allFinite()) mf.alpha = Eigen::VectorXd::Zero(q);
  const Eigen::VectorXd res = ytilde - tbar * mf.alpha;
  const double mean = res.mean();
  mf.resid_var = m > 1 ? (res.array() - mean).square().sum() / (m - 1) : 1.0;
  if (!(mf.resid_var > 1e-6) || !std::isfinite(mf.resid_var)) mf.resid_var = 1e-6;

  // Fisher scoring on the likelihood, random effects ignored.
  GlmEval cur = glm_eval(s, mf.alpha, true);
  if (std::isfinite(cur.loglik)) {
    for (int it = 0; it < 50; ++it) {
      if (cur.grad.cwiseAbs().maxCoeff() < 1e-8) break;
      const Eigen::VectorXd step = cur.info.ldlt().solve(cur.grad);
      if (!step.allFinite()) break;
      bool moved = false;
      double t = 1.0;
      for (int h = 0; h < 30; ++h, t *= 0.5) {
        GlmEval next = glm_eval(s, mf.alpha + t * step, true);
        if (std::isfinite(next.loglik) && next.loglik >= cur.loglik) {
          mf.alpha += t * step;
          cur = std::move(next);
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
  }

  const auto fam = s.spec().family;
  if (has_dispersion(fam) && std::isfinite(cur.loglik)) {
    double pearson = 0.0;
    for (int j = 0; j < m; ++j) {
      const double r = s.z()[j] - cur.mu_z[j];
      pearson += r * r / variance_function(fam, cur.mu_z[j]);
    }
    mf.psi = std::max(pearson / std::max(1, m - q), 1e-6);
  }
  return mf;
}

ModelState initial_state(const ModelStructures& s, const MomentFit& mf, const Sigma2fsRule& rule) {
  const auto& spec = s.spec();
  const double v = mf.resid_var;
  ModelState th;
  th.alpha = mf.alpha;
  th.prior.type = spec.prior;
  th.prior.taper_multiplier = spec.taper_multiplier;
  for (int k = 0; k < s.basis().n_res; ++k) {
    const double md = s.basis().mindist[static_cast<std::size_t>(k)];
    switch (spec.prior) {
      case PriorType::K_tapered:
        th.prior.sigma2.push_back(v);
        th.prior.tau.push_back(md);
        break;
      case PriorType::Q_leroux:
        th.prior.kappa.push_back(1.0 / v);
        th.prior.rho.push_back(0.1);
        break;
      case PriorType::Q_dist:
        th.prior.kappa.push_back(1.0 / v);
        th.prior.rho.push_back(0.1);
        th.prior.tau.push_back(md);
        break;
    }
  }
  th.prior.rho_t = 0.1;
  const int n_fs = spec.fs_by_spatial_bau ? s.grid().n_spatial() : 1;
  th.sigma2fs = Eigen::VectorXd::Constant(n_fs, rule.fixed ? rule.value : v);
  th.psi = has_dispersion(spec.family) ? mf.psi : 1.0;
  return th;
}

ThetaCodec::ThetaCodec(const ModelStructures& s, const ModelState& like, const FitOptions& opts,
                       bool sigma2fs_fixed)
    : shape_(like),
      tensor_(s.basis().is_tensor()),
      fine_scale_(s.spec().fine_scale),
      dispersion_(has_dispersion(s.spec().family)) {
  auto add = [&](std::string name, Transform t, bool fixed) { params_.push_back({std::move(name), t, fixed}); };
  for (Eigen::Index i = 0; i < like.alpha.size(); ++i) {
    add("alpha[" + std::to_string(i) + "]", Transform::identity, opts.fix_alpha);
  }
  const auto res = [](const char* n, std::size_t k) { return std::string(n) + "[" + std::to_string(k + 1) + "]"; };
  if (s.n_basis() > 0) {
    for (std::size_t k = 0; k < static_cast<std::size_t>(s.basis().n_res); ++k) {
      switch (like.prior.type) {
        case PriorType::K_tapered:
          add(res("sigma2", k), Transform::log, opts.fix_prior);
          add(res("tau", k), Transform::log, opts.fix_prior);
          break;
        case PriorType::Q_leroux:
          add(res("kappa", k), Transform::log, opts.fix_prior);
          add(res("rho", k), Transform::log, opts.fix_prior);
          break;
        case PriorType::Q_dist:
          add(res("kappa", k), Transform::log, opts.fix_prior);
          add(res("rho", k), Transform::log, opts.fix_prior);
          add(res("tau", k), Transform::log, opts.fix_prior);
          break;
      }
    }
    if (tensor_) add("rho_t", Transform::atanh, opts.fix_rho_t);
  }
  if (fine_scale_) {
    for (Eigen::Index i = 0; i < like.sigma2fs.size(); ++i) {
      add("sigma2fs[" + std::to_string(i) + "]", Transform::log, opts.fix_sigma2fs || sigma2fs_fixed);
    }
  }
  if (dispersion_) add("psi", Transform::log, opts.fix_psi);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_[i].fixed) free_.push_back(static_cast<int>(i));
  }
  if (s.n_basis() == 0) {
    shape_.prior.sigma2.clear();
    shape_.prior.tau.clear();
    shape_.prior.kappa.clear();
    shape_.prior.rho.clear();
  }
}

Eigen::VectorXd ThetaCodec::encode_all(const ModelState& th) const {
  std::vector<double> v;
  for (Eigen::Index i = 0; i < th.alpha.size(); ++i) v.push_back(th.alpha[i]);
  if (!shape_.prior.sigma2.empty() || !shape_.prior.kappa.empty()) {
    const std::size_t nr = std::max(th.prior.sigma2.size(), th.prior.kappa.size());
    for (std::size_t k = 0; k < nr; ++k) {
      switch (th.prior.type) {
        case PriorType::K_tapered:
          v.push_back(th.prior.sigma2[k]);
          v.push_back(th.prior.tau[k]);
          break;
        case PriorType::Q_leroux:
          v.push_back(th.prior.kappa[k]);
          v.push_back(th.prior.rho[k]);
          break;
        case PriorType::Q_dist:
          v.push_back(th.prior.kappa[k]);
          v.push_back(th.prior.rho[k]);
          v.push_back(th.prior.tau[k]);
          break;
      }
    }
    if (tensor_) v.push_back(th.prior.rho_t);
  }
  if (fine_scale_) {
    for (Eigen::Index i = 0; i < th.sigma2fs.size(); ++i) v.push_back(th.sigma2fs[i]);
  }
  if (dispersion_) v.push_back(th.psi);
  if (v.size() != params_.size()) throw state_error("theta does not match the parameter layout");
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = forward(params_[i].transform, v[i]);
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

ModelState ThetaCodec::decode_all(const Eigen::VectorXd& full) const {
  ModelState th = shape_;
  Eigen::Index p = 0;
  auto next = [&]() {
    const double x = full[p];
    return backward(params_[static_cast<std::size_t>(p++)].transform, x);
  };
  for (Eigen::Index i = 0; i < th.alpha.size(); ++i) th.alpha[i] = next();
  const std::size_t nr = std::max(th.prior.sigma2.size(), th.prior.kappa.size());
  if (nr > 0) {
    for (std::size_t k = 0; k < nr; ++k) {
      switch (th.prior.type) {
        case PriorType::K_tapered:
          th.prior.sigma2[k] = next();
          th.prior.tau[k] = next();
          break;
        case PriorType::Q_leroux:
          th.prior.kappa[k] = next();
          th.prior.rho[k] = next();
          break;
        case PriorType::Q_dist:
          th.prior.kappa[k] = next();
          th.prior.rho[k] = next();
          th.prior.tau[k] = next();
          break;
      }
    }
    if (tensor_) th.prior.rho_t = next();
  }
  if (fine_scale_) {
    for (Eigen::Index i = 0; i < th.sigma2fs.size(); ++i) th.sigma2fs[i] = next();
  }
  if (dispersion_) th.psi = next();
  return th;
}

Eigen::VectorXd ThetaCodec::encode(const ModelState& th) const {
  const Eigen::VectorXd full = encode_all(th);
  Eigen::VectorXd x(n_free());
  for (int i = 0; i < n_free(); ++i) x[i] = full[free_[static_cast<std::size_t>(i)]];
  return x;
}

ModelState ThetaCodec::decode(const Eigen::VectorXd& x, const ModelState& base) const {
  Eigen::VectorXd full = encode_all(base);
  for (int i = 0; i < n_free(); ++i) full[free_[static_cast<std::size_t>(i)]] = x[i];
  return decode_all(full);
}

namespace {

struct Probe {
  double loglik = -kInf;
  LaplaceResult lr;
};

Probe probe(const ModelStructures& s, const ModelState& th, const std::optional<Eigen::VectorXd>& u0,
            const InnerOptions& inner) {
  Probe p;
  try {
    p.lr = laplace_objective(s, th, u0, inner);
    if (std::isfinite(p.lr.loglik)) p.loglik = p.lr.loglik;
  } catch (const Error&) {
    p.loglik = -kInf;
  }
  return p;
}

}  // namespace

Eigen::VectorXd outer_gradient(const ModelStructures& s, const ThetaCodec& codec, const ModelState& theta,
                               const LaplaceResult& at, const FitOptions& opts) {
  const Eigen::VectorXd x = codec.encode(theta);
  const Eigen::Index n = x.size();
  Eigen::VectorXd g(n);
  const double f0 = at.loglik;
  kernels::omp::for_each_column(n, [&](Eigen::Index i) {
    const double h = opts.fd_step * (1.0 + std::abs(x[i]));
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fp = probe(s, codec.decode(xp, theta), at.u_hat, opts.inner).loglik;
    const double fm = probe(s, codec.decode(xm, theta), at.u_hat, opts.inner).loglik;
    if (std::isfinite(fp) && std::isfinite(fm)) {
      g[i] = (fp - fm) / (2.0 * h);
    } else if (std::isfinite(fp)) {
      g[i] = (fp - f0) / h;
    } else if (std::isfinite(fm)) {
      g[i] = (f0 - fm) / h;
    } else {
      g[i] = 0.0;
    }
  });
  return g;
}

FitResult fit(const ModelStructures& s, const FitOptions& opts) {
  const auto& spec = s.spec();
  FitResult out;
  FitReport& rep = out.report;
  switch (validate_combination(spec.family, spec.link)) {
    case Combination::forbidden:
      throw config_error("the " + to_string(spec.family) + " family cannot be used with the " + to_string(spec.link) +
                         " link (not an allowed family/link combination)");
    case Combination::warn:
      rep.warnings.push_back("the " + to_string(spec.family) + "/" + to_string(spec.link) +
                             " combination is allowed but not recommended");
      break;
    case Combination::ok: break;
  }

  const MomentFit mf = moment_fit(s);
  rep.resid_var = mf.resid_var;
  Sigma2fsRule rule;
  if (spec.fine_scale) rule = resolve_sigma2fs(s.supports(), opts.known_sigma2fs, mf.resid_var);
  ModelState th;
  if (opts.start) {
    th = *opts.start;
    if (opts.known_sigma2fs) {
      th.sigma2fs.setConstant(rule.value);
    } else if (rule.fixed) {
      rule.rough = false;
      rule.value = th.sigma2fs.size() > 0 ? th.sigma2fs[0] : 0.0;
    }
    if (!has_dispersion(spec.family)) th.psi = 1.0;
  } else {
    th = initial_state(s, mf, rule);
  }
  FitOptions eff = opts;
  if (opts.known_psi && has_dispersion(spec.family)) {
    if (!(*opts.known_psi > 0.0) || !std::isfinite(*opts.known_psi)) {
      throw domain_error("known_psi must be a positive number (got " + std::to_string(*opts.known_psi) + ")");
    }
    th.psi = *opts.known_psi;
    eff.fix_psi = true;
  }
  rep.sigma2fs = rule;
  if (rule.rough) {
    rep.warnings.push_back("fine-scale variance fixed to a rough estimate (" + std::to_string(rule.value) +
                           "): no observation support is a single BAU");
  }

  const ThetaCodec codec(s, th, eff, rule.fixed);
  rep.params = codec.params();
  Eigen::VectorXd x = codec.encode(th);

  Probe cur = probe(s, th, std::nullopt, opts.inner);
  rep.evaluations = 1;
  if (!std::isfinite(cur.loglik)) {
    throw numerical_error("the Laplace log-likelihood is not finite at the initial parameters");
  }
  rep.trace.push_back(cur.loglik);
  const int n = codec.n_free();
  if (n == 0) {
    rep.converged = true;
    out.theta = th;
    out.laplace = cur.lr;
    return out;
  }

  // Minimise f = -loglik.
  auto grad_at = [&](const ModelState& t, const LaplaceResult& lr) {
    rep.evaluations += 2 * n;
    return Eigen::VectorXd(-outer_gradient(s, codec, t, lr, opts));
  };
  double f = -cur.loglik;
  Eigen::VectorXd g = grad_at(th, cur.lr);
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
  bool fresh = true;
  bool scaled = false;

  if (g.cwiseAbs().maxCoeff() < opts.grad_tol) rep.converged = true;
  for (int iter = 1; iter <= opts.max_iter && !rep.converged; ++iter) {
    Eigen::VectorXd d = -hinv * g;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      hinv.setIdentity();
      fresh = true;
      d = -g;
      slope = g.dot(d);
    }
    double t = std::min(1.0, 3.0 / d.cwiseAbs().maxCoeff());
    bool accepted = false;
    Probe next;
    Eigen::VectorXd xn;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      xn = x + t * d;
      next = probe(s, codec.decode(xn, th), cur.lr.u_hat, opts.inner);
      ++rep.evaluations;
      if (std::isfinite(next.loglik) && -next.loglik <= f + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
    }
    rep.iterations = iter;
    if (!accepted) {
      if (!fresh) {
        hinv.setIdentity();
        fresh = true;
        continue;
      }
      rep.warnings.push_back("outer line search could not improve the objective");
      break;
    }
    const ModelState tn = codec.decode(xn, th);
    const Eigen::VectorXd gn = grad_at(tn, next.lr);
    const Eigen::VectorXd sv = xn - x;
    const Eigen::VectorXd yv = gn - g;
    const double sy = sv.dot(yv);
    if (sy > 1e-12 * sv.norm() * yv.norm()) {
      if (!scaled) {
        hinv *= sy / yv.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - rho * sv * yv.transpose();
      hinv = a * hinv * a.transpose() + rho * sv * sv.transpose();
      fresh = false;
    }
    const double df = f + next.loglik;
    x = xn;
    th = tn;
    f = -next.loglik;
    g = gn;
    cur = std::move(next);
    rep.trace.push_back(cur.loglik);
    if (std::abs(df) < opts.obj_tol && g.cwiseAbs().maxCoeff() < opts.grad_tol) rep.converged = true;
  }
  rep.grad_norm = g.cwiseAbs().maxCoeff();
  if (!rep.converged) {
    rep.warnings.push_back("outer optimiser did not converge after " + std::to_string(rep.iterations) +
                           " iterations (max |gradient| = " + std::to_string(rep.grad_norm) +
                           "); returning the best parameters found");
  }
  out.theta = th;
  out.laplace = cur.lr;
  return out;
}

}  // namespace frk
