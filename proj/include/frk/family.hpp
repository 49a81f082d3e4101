#pragma once

#include <random>
#include <string>

namespace frk {

enum class Family { gaussian, poisson, gamma, inverse_gaussian, negative_binomial, binomial };
enum class Link { identity, inverse, log, sqrt, logit, probit, cloglog };

Family parse_family(const std::string& name);
Link parse_link(const std::string& name);
std::string to_string(Family f);
std::string to_string(Link l);

/// Families with a known size parameter k.
inline bool has_size(Family f) { return f == Family::negative_binomial || f == Family::binomial; }
/// Families whose dispersion psi is estimated (fixed to 1 otherwise).
inline bool has_dispersion(Family f) {
  return f == Family::gaussian || f == Family::gamma || f == Family::inverse_gaussian;
}
/// Links mapping the latent process to a probability in (0, 1).
inline bool is_probability_link(Link l) { return l == Link::logit || l == Link::probit || l == Link::cloglog; }

enum class Combination { ok, warn, forbidden };

/// Supported / allowed-with-warning / forbidden family and link pairs.
Combination validate_combination(Family f, Link l);

/// Value and first two derivatives of a scalar function.
struct Deriv2 {
  double value;
  double d1;
  double d2;
};

/// g^{-1} (or f^{-1} for probability links) with derivatives in y.
Deriv2 inverse_link(Link l, double y);
/// g (or f) evaluated at a mean (or probability).
double link_fn(Link l, double mu);

double std_normal_cdf(double x);
double std_normal_quantile(double p);

struct MeanProb {
  double mu;
  double pi;  // NaN when the family has no probability parameter
};

/// Maps a latent value to the BAU mean (and probability, for size families).
MeanProb mean_from_latent(double y, Link l, Family f, double k);

/// Mean with derivatives in y, as used by the inner Newton iterations.
Deriv2 mean_derivs(double y, Link l, Family f, double k);

/// h(mu; k): probability implied by a mean for size families.
double prob_from_mean(Family f, double mu, double k);

/// Log density (log PMF) of z with its first two derivatives in mu.
/// `value` is -inf (derivatives NaN) when mu lies outside the family's mean domain.
Deriv2 log_density(Family f, double z, double mu, double psi, double k);

/// Expected information -E[d2 log f / d mu^2] = 1 / Var(Z | mu).
double fisher_information(Family f, double mu, double psi, double k);

/// Throws a domain error if z is outside the family's support.
void check_support(Family f, double z, double k);

/// One draw from the family with the given mean.
double sample_family(Family f, double mu, double psi, double k, std::mt19937_64& rng);

}  // namespace frk
