#include "frk/laplace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "frk/error.hpp"
#include "hessian_plan.hpp"

namespace frk {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2 pi)
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double sparse_logdet(const SparseLLT& llt) {
  const auto& l = llt.matrixL().nestedExpression();
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l.coeff(i, i));
  return 2.0 * s;
}

struct DataEval {
  double loglik = 0.0;
  Eigen::VectorXd dmu, d2mu;  // per touched BAU
  Eigen::VectorXd mu_z;       // per datum
  Eigen::VectorXd d1, d2;     // d log f / d mu_Z and second derivative
};

// Data log-likelihood at a latent vector on touched BAUs; loglik = -inf if out of domain.
DataEval eval_data(const ModelStructures& s, const ModelState& theta, const Eigen::VectorXd& y, bool derivs) {
  const auto& spec = s.spec();
  const Eigen::Index nt = y.size();
  DataEval e;
  Eigen::VectorXd mu(nt);
  if (derivs) {
    e.dmu.resize(nt);
    e.d2mu.resize(nt);
  }
  const auto& k = s.k_touched();
  for (Eigen::Index a = 0; a < nt; ++a) {
    const Deriv2 m = mean_derivs(y[a], spec.link, spec.family, k[a]);
    mu[a] = m.value;
    if (derivs) {
      e.dmu[a] = m.d1;
      e.d2mu[a] = m.d2;
    }
  }
  e.mu_z = s.cz_touched() * mu;
  const Eigen::Index m = e.mu_z.size();
  if (derivs) {
    e.d1.resize(m);
    e.d2.resize(m);
  }
  const auto& z = s.z();
  const auto& kz = s.k_obs_support();
  for (Eigen::Index j = 0; j < m; ++j) {
    const Deriv2 ld = log_density(spec.family, z[j], e.mu_z[j], theta.psi, kz[j]);
    if (!std::isfinite(ld.value)) {
      e.loglik = kNegInf;
      return e;
    }
    e.loglik += ld.value;
    if (derivs) {
      e.d1[j] = ld.d1;
      e.d2[j] = ld.d2;
    }
  }
  return e;
}

double prior_loglik(const ModelStructures& s, const PriorTerms& pt, const Eigen::VectorXd& u) {
  const int r = s.n_basis();
  double v = 0.0;
  if (r > 0) {
    const auto eta = u.head(r);
    v += 0.5 * pt.logdet_q - 0.5 * r * kLog2Pi - 0.5 * eta.dot(pt.q * eta);
  }
  if (s.spec().fine_scale) {
    const auto xi = u.tail(s.n_touched());
    for (Eigen::Index a = 0; a < xi.size(); ++a) {
      v += -0.5 * (kLog2Pi + std::log(pt.fs_var[a])) - xi[a] * xi[a] / (2.0 * pt.fs_var[a]);
    }
  }
  return v;
}

struct Evaluation {
  double value = kNegInf;
  Eigen::VectorXd grad;
  DataEval data;
};

Evaluation evaluate(const ModelStructures& s, const ModelState& theta, const PriorTerms& pt,
                    const Eigen::VectorXd& u) {
  Evaluation ev;
  const Eigen::VectorXd y = latent_touched(s, theta, u);
  ev.data = eval_data(s, theta, y, true);
  if (!std::isfinite(ev.data.loglik)) return ev;
  ev.value = ev.data.loglik + prior_loglik(s, pt, u);
  const Eigen::VectorXd grad_y =
      ev.data.dmu.cwiseProduct(s.cz_touched().transpose() * ev.data.d1);
  ev.grad = s.effects_design().transpose() * grad_y;
  const int r = s.n_basis();
  if (r > 0) ev.grad.head(r) -= pt.q * u.head(r);
  if (s.spec().fine_scale) ev.grad.tail(s.n_touched()) -= u.tail(s.n_touched()).cwiseQuotient(pt.fs_var);
  return ev;
}

// -d2 l / du du; `fisher` swaps the data block for its expected information.
SpMat neg_hessian(const ModelStructures& s, const ModelState& theta, const PriorTerms& pt, const DataEval& d,
                  bool fisher) {
  const auto& spec = s.spec();
  const SpMatRow j = s.cz_touched() * d.dmu.asDiagonal();
  Eigen::VectorXd w(d.mu_z.size());
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    w[k] = fisher ? fisher_information(spec.family, d.mu_z[k], theta.psi, s.k_obs_support()[k]) : -d.d2[k];
  }
  SpMat wy = SpMat(j.transpose()) * w.asDiagonal() * SpMat(j);
  if (!fisher) {
    const Eigen::VectorXd extra = -d.d2mu.cwiseProduct(s.cz_touched().transpose() * d.d1);
    SpMat diag(extra.size(), extra.size());
    diag.setIdentity();
    diag = extra.asDiagonal() * diag;
    wy += diag;
  }
  const SpMat& b = s.effects_design();
  SpMat p = SpMat(b.transpose()) * wy * b;
  const int r = s.n_basis();
  std::vector<Eigen::Triplet<double>> trips;
  for (int k = 0; k < pt.q.outerSize(); ++k) {
    for (SpMat::InnerIterator it(pt.q, k); it; ++it) trips.emplace_back(static_cast<int>(it.row()), k, it.value());
  }
  if (spec.fine_scale) {
    for (int a = 0; a < s.n_touched(); ++a) trips.emplace_back(r + a, r + a, 1.0 / pt.fs_var[a]);
  }
  SpMat prior(p.rows(), p.cols());
  prior.setFromTriplets(trips.begin(), trips.end());
  p += prior;
  p.makeCompressed();
  return p;
}

// Same matrix as neg_hessian (lower triangle) through the precomputed plan.
SpMat assemble(const ModelStructures& s, const ModelState& theta, const PriorTerms& pt, const DataEval& d,
               bool fisher) {
  const detail::HessianPlan& plan = s.hessian_plan();
  const auto& spec = s.spec();
  SpMat h = plan.pattern;
  double* hv = h.valuePtr();
  std::vector<double> g(static_cast<std::size_t>(plan.n_g), 0.0);
  for (const auto& t : plan.g_terms) g[static_cast<std::size_t>(t.g)] += t.c * d.dmu[t.a];
  Eigen::VectorXd w(d.mu_z.size());
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    w[k] = fisher ? fisher_information(spec.family, d.mu_z[k], theta.psi, s.k_obs_support()[k]) : -d.d2[k];
  }
  for (const auto& t : plan.w_terms) {
    hv[t.h] += g[static_cast<std::size_t>(t.g1)] * w[t.j] * g[static_cast<std::size_t>(t.g2)];
  }
  if (!fisher) {
    const Eigen::VectorXd extra = -d.d2mu.cwiseProduct(s.cz_touched().transpose() * d.d1);
    for (const auto& t : plan.d_terms) hv[t.h] += t.c * extra[t.a];
  }
  SpMat q = pt.q;
  q.makeCompressed();
  const int* outer = q.outerIndexPtr();
  const int* inner = q.innerIndexPtr();
  const double* qv = q.valuePtr();
  const bool cached = static_cast<std::size_t>(q.nonZeros()) == plan.q_inner.size() &&
                      std::equal(plan.q_outer.begin(), plan.q_outer.end(), outer) &&
                      std::equal(plan.q_inner.begin(), plan.q_inner.end(), inner);
  for (int k = 0; k < q.outerSize(); ++k) {
    for (int e = outer[k]; e < outer[k + 1]; ++e) {
      if (inner[e] < k) continue;
      const int pos = cached ? plan.q_pos[static_cast<std::size_t>(e)] : plan.find(inner[e], k);
      if (pos < 0) {
        // prior entry outside the planned pattern: fall back to the general product
        return SpMat(neg_hessian(s, theta, pt, d, fisher).triangularView<Eigen::Lower>());
      }
      hv[pos] += qv[e];
    }
  }
  if (spec.fine_scale) {
    for (int a = 0; a < s.n_touched(); ++a) hv[plan.xi_diag[static_cast<std::size_t>(a)]] += 1.0 / pt.fs_var[a];
  }
  return h;
}

bool factor_ok(const SparseLLT& llt) {
  if (llt.info() != Eigen::Success) return false;
  const auto& l = llt.matrixL().nestedExpression();
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    const double v = l.coeff(i, i);
    if (!(v > 0.0) || !std::isfinite(v)) return false;
  }
  return true;
}

// Factors the negative Hessian at u into `llt` (pattern already analysed): observed
// information first, Fisher scoring as fallback. Returns whether the observed one was used.
bool factor_at(SparseLLT& llt, const ModelStructures& s, const ModelState& theta, const PriorTerms& pt,
               const DataEval& d) {
  llt.factorize(assemble(s, theta, pt, d, false));
  if (factor_ok(llt)) return true;
  llt.factorize(assemble(s, theta, pt, d, true));
  if (!factor_ok(llt)) throw numerical_error("inner Newton: Hessian factorization failed");
  return false;
}

}  // namespace

namespace detail {

int HessianPlan::find(int row, int col) const {
  const int* inner = pattern.innerIndexPtr();
  const int* b = inner + pattern.outerIndexPtr()[col];
  const int* e = inner + pattern.outerIndexPtr()[col + 1];
  const int* it = std::lower_bound(b, e, row);
  return it != e && *it == row ? static_cast<int>(it - inner) : -1;
}

std::shared_ptr<const HessianPlan> build_hessian_plan(const ModelStructures& s) {
  auto plan = std::make_shared<HessianPlan>();
  const int p = s.n_random();
  if (p == 0) return plan;
  const int r = s.n_basis();
  const SpMatRow& c = s.cz_touched();
  const SpMatRow b = s.effects_design();
  std::vector<Eigen::Triplet<double>> cells;
  auto lower = [&](int i, int j) { cells.emplace_back(std::max(i, j), std::min(i, j), 0.0); };

  // G = C diag(dmu) B, one row per datum
  struct Pair {
    int row, col;
  };
  std::vector<Pair> w_cells, d_cells;
  std::vector<int> slot(static_cast<std::size_t>(p), -1), owner(static_cast<std::size_t>(p), -1);
  for (int j = 0; j < c.rows(); ++j) {
    std::vector<int> cols;
    for (SpMatRow::InnerIterator ci(c, j); ci; ++ci) {
      const int a = static_cast<int>(ci.col());
      for (SpMatRow::InnerIterator bi(b, a); bi; ++bi) {
        const auto k = static_cast<std::size_t>(bi.col());
        if (owner[k] != j) {
          owner[k] = j;
          slot[k] = plan->n_g++;
          cols.push_back(static_cast<int>(k));
        }
        plan->g_terms.push_back({slot[k], a, ci.value() * bi.value()});
      }
    }
    std::sort(cols.begin(), cols.end());
    for (std::size_t x = 0; x < cols.size(); ++x) {
      for (std::size_t y = 0; y <= x; ++y) {
        const int k = cols[x], l = cols[y];
        plan->w_terms.push_back({-1, slot[static_cast<std::size_t>(k)], slot[static_cast<std::size_t>(l)], j});
        w_cells.push_back({k, l});
        lower(k, l);
      }
    }
  }
  // B^T D B, one row per touched BAU
  for (int a = 0; a < b.rows(); ++a) {
    for (SpMatRow::InnerIterator x(b, a); x; ++x) {
      for (SpMatRow::InnerIterator y(b, a); y && y.col() <= x.col(); ++y) {
        plan->d_terms.push_back({-1, a, x.value() * y.value()});
        d_cells.push_back({static_cast<int>(x.col()), static_cast<int>(y.col())});
        lower(static_cast<int>(x.col()), static_cast<int>(y.col()));
      }
    }
  }
  for (int k = 0; k < p; ++k) lower(k, k);

  // prior precision at representative parameters
  SpMat q;
  if (r > 0) {
    const BasisSet& basis = s.basis();
    CoefPrior rep;
    rep.type = s.spec().prior;
    rep.taper_multiplier = s.spec().taper_multiplier;
    rep.sigma2.assign(static_cast<std::size_t>(basis.n_res), 1.0);
    rep.tau = basis.mindist;
    rep.kappa.assign(static_cast<std::size_t>(basis.n_res), 1.0);
    rep.rho.assign(static_cast<std::size_t>(basis.n_res), 0.5);
    rep.rho_t = 0.5;
    try {
      q = coefficient_precision(basis, rep);
      q.makeCompressed();
    } catch (const Error&) {
      q = SpMat();
    }
    for (int k = 0; k < q.outerSize(); ++k) {
      for (SpMat::InnerIterator it(q, k); it; ++it) lower(static_cast<int>(it.row()), k);
    }
  }

  plan->pattern.resize(p, p);
  plan->pattern.setFromTriplets(cells.begin(), cells.end());
  plan->pattern.makeCompressed();
  std::fill(plan->pattern.valuePtr(), plan->pattern.valuePtr() + plan->pattern.nonZeros(), 0.0);
  for (std::size_t i = 0; i < w_cells.size(); ++i) plan->w_terms[i].h = plan->find(w_cells[i].row, w_cells[i].col);
  for (std::size_t i = 0; i < d_cells.size(); ++i) plan->d_terms[i].h = plan->find(d_cells[i].row, d_cells[i].col);
  if (s.spec().fine_scale) {
    for (int a = 0; a < s.n_touched(); ++a) plan->xi_diag.push_back(plan->find(r + a, r + a));
  }
  if (q.nonZeros() > 0) {
    plan->q_outer.assign(q.outerIndexPtr(), q.outerIndexPtr() + q.outerSize() + 1);
    plan->q_inner.assign(q.innerIndexPtr(), q.innerIndexPtr() + q.nonZeros());
    plan->q_pos.assign(static_cast<std::size_t>(q.nonZeros()), -1);
    for (int k = 0; k < q.outerSize(); ++k) {
      for (int e = q.outerIndexPtr()[k]; e < q.outerIndexPtr()[k + 1]; ++e) {
        const int row = q.innerIndexPtr()[e];
        if (row >= k) plan->q_pos[static_cast<std::size_t>(e)] = plan->find(row, k);
      }
    }
  }
  return plan;
}

}  // namespace detail

PriorTerms prior_terms(const ModelStructures& s, const ModelState& theta) {
  PriorTerms pt;
  if (s.n_basis() > 0) {
    pt.q = coefficient_precision(s.basis(), theta.prior);
    SparseLLT llt(pt.q);
    if (!factor_ok(llt)) throw numerical_error("coefficient precision matrix is not positive-definite");
    pt.logdet_q = sparse_logdet(llt);
  }
  if (s.spec().fine_scale) {
    pt.fs_var = s.fs_variances_touched(theta);
    for (Eigen::Index a = 0; a < pt.fs_var.size(); ++a) {
      if (!(pt.fs_var[a] > 0.0) || !std::isfinite(pt.fs_var[a])) {
        throw domain_error("fine-scale variance must be > 0");
      }
    }
  }
  if (has_dispersion(s.spec().family) && !(theta.psi > 0.0)) throw domain_error("dispersion psi must be > 0");
  return pt;
}

Eigen::VectorXd latent_touched(const ModelStructures& s, const ModelState& theta, const Eigen::VectorXd& u) {
  Eigen::VectorXd y = s.t_touched() * theta.alpha;
  if (u.size() > 0) y += s.effects_design() * u;
  return y;
}

double complete_loglik(const ModelStructures& s, const ModelState& theta, const PriorTerms& pt,
                       const Eigen::VectorXd& u) {
  const DataEval d = eval_data(s, theta, latent_touched(s, theta, u), false);
  if (!std::isfinite(d.loglik)) return kNegInf;
  return d.loglik + prior_loglik(s, pt, u);
}

double complete_loglik(const ModelStructures& s, const ModelState& theta, const Eigen::VectorXd& u) {
  return complete_loglik(s, theta, prior_terms(s, theta), u);
}

Eigen::VectorXd complete_loglik_gradient(const ModelStructures& s, const ModelState& theta, const Eigen::VectorXd& u) {
  const PriorTerms pt = prior_terms(s, theta);
  Evaluation ev = evaluate(s, theta, pt, u);
  if (!std::isfinite(ev.value)) throw domain_error("gradient requested outside the family's mean domain");
  return ev.grad;
}

SpMat complete_loglik_neg_hessian(const ModelStructures& s, const ModelState& theta, const Eigen::VectorXd& u) {
  const PriorTerms pt = prior_terms(s, theta);
  Evaluation ev = evaluate(s, theta, pt, u);
  if (!std::isfinite(ev.value)) throw domain_error("Hessian requested outside the family's mean domain");
  return neg_hessian(s, theta, pt, ev.data, false);
}

RandomEffects inner_mode(const ModelStructures& s, const ModelState& theta, const PriorTerms& pt,
                         const Eigen::VectorXd& u0, const InnerOptions& opts) {
  const int p = s.n_random();
  RandomEffects re;
  re.u = u0.size() == p ? u0 : Eigen::VectorXd::Zero(p);
  if (p == 0) return re;
  Evaluation ev = evaluate(s, theta, pt, re.u);
  if (!std::isfinite(ev.value) && u0.size() == p) {
    re.u.setZero();
    ev = evaluate(s, theta, pt, re.u);
  }
  if (!std::isfinite(ev.value)) {
    throw numerical_error("inner Newton: starting point lies outside the family's mean domain");
  }
  auto llt = std::make_shared<SparseLLT>();
  llt->analyzePattern(s.hessian_plan().pattern);
  for (int it = 0;; ++it) {
    re.iterations = it;
    re.grad_norm = ev.grad.cwiseAbs().maxCoeff();
    const bool observed = factor_at(*llt, s, theta, pt, ev.data);
    if (observed) re.factor = llt;
    if (re.grad_norm < opts.tol) return re;
    if (it >= opts.max_iter) {
      throw numerical_error("inner Newton did not converge after " + std::to_string(opts.max_iter) +
                            " iterations (max |gradient| = " + std::to_string(re.grad_norm) + ")");
    }
    const Eigen::VectorXd step = llt->solve(ev.grad);
    // near the mode the objective changes by less than its rounding error, so a
    // step that stays within rounding and shrinks the gradient also counts
    const double slack = 1e-12 * std::max(1.0, std::abs(ev.value));
    double t = 1.0;
    bool moved = false;
    for (int h = 0; h < 60; ++h, t *= 0.5) {
      Evaluation next = evaluate(s, theta, pt, re.u + t * step);
      if (!std::isfinite(next.value)) continue;
      if (next.value >= ev.value ||
          (next.value >= ev.value - slack && next.grad.cwiseAbs().maxCoeff() < re.grad_norm)) {
        re.u += t * step;
        ev = std::move(next);
        re.factor.reset();
        moved = true;
        break;
      }
    }
    if (!moved) {
      // No ascent possible in floating point: accept if the Newton decrement is negligible.
      if (ev.grad.dot(step) < slack) return re;
      throw numerical_error("inner Newton: line search failed (max |gradient| = " + std::to_string(re.grad_norm) +
                            ")");
    }
  }
}

LaplaceResult laplace_objective(const ModelStructures& s, const ModelState& theta,
                                const std::optional<Eigen::VectorXd>& u0, const InnerOptions& opts) {
  const PriorTerms pt = prior_terms(s, theta);
  const int p = s.n_random();
  const RandomEffects re = inner_mode(s, theta, pt, u0.value_or(Eigen::VectorXd::Zero(p)), opts);
  LaplaceResult out;
  out.u_hat = re.u;
  out.iterations = re.iterations;
  out.grad_norm = re.grad_norm;
  if (p == 0) {
    out.complete = complete_loglik(s, theta, pt, re.u);
    out.loglik = out.complete;
    return out;
  }
  const Evaluation ev = evaluate(s, theta, pt, re.u);
  std::shared_ptr<const SparseLLT> llt = re.factor;
  if (!llt) {
    auto fresh = std::make_shared<SparseLLT>();
    fresh->compute(assemble(s, theta, pt, ev.data, false));
    llt = std::move(fresh);
  }
  if (!factor_ok(*llt)) throw numerical_error("Laplace: Hessian at the mode is not negative-definite");
  out.complete = ev.value;
  out.loglik = ev.value + 0.5 * p * kLog2Pi - 0.5 * sparse_logdet(*llt);
  out.hess_factor = std::move(llt);
  return out;
}

}  // namespace frk
