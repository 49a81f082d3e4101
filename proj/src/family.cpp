#include "frk/family.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "frk/error.hpp"

namespace frk {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string canonical(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
    return c == '_' ? '-' : static_cast<char>(std::tolower(c));
  });
  return s;
}

Deriv2 invalid() { return {kNegInf, kNaN, kNaN}; }

// Probability and its complement for a probability link, both to full precision.
struct ProbLink {
  double pi, q, d1, d2;
};

ProbLink prob_link(Link l, double y) {
  switch (l) {
    case Link::logit: {
      const double pi = y >= 0 ? 1.0 / (1.0 + std::exp(-y)) : std::exp(y) / (1.0 + std::exp(y));
      const double q = y >= 0 ? std::exp(-y) / (1.0 + std::exp(-y)) : 1.0 / (1.0 + std::exp(y));
      const double d1 = pi * q;
      return {pi, q, d1, d1 * (q - pi)};
    }
    case Link::probit: {
      const double dens = std::exp(-0.5 * y * y) / std::sqrt(2.0 * std::numbers::pi);
      return {std_normal_cdf(y), std_normal_cdf(-y), dens, -y * dens};
    }
    case Link::cloglog: {
      const double e = std::exp(y);
      const double q = std::exp(-e);
      const double d1 = e * q;
      return {-std::expm1(-e), q, d1, d1 * (1.0 - e)};
    }
    default:
      break;
  }
  throw config_error("link '" + to_string(l) + "' is not a probability link");
}

}  // namespace

Family parse_family(const std::string& name) {
  const std::string s = canonical(name);
  if (s == "gaussian") return Family::gaussian;
  if (s == "poisson") return Family::poisson;
  if (s == "gamma") return Family::gamma;
  if (s == "inverse-gaussian") return Family::inverse_gaussian;
  if (s == "negative-binomial") return Family::negative_binomial;
  if (s == "binomial") return Family::binomial;
  throw config_error("unknown family '" + name + "'");
}

Link parse_link(const std::string& name) {
  const std::string s = canonical(name);
  if (s == "identity") return Link::identity;
  if (s == "inverse") return Link::inverse;
  if (s == "log") return Link::log;
  if (s == "sqrt" || s == "square-root") return Link::sqrt;
  if (s == "logit") return Link::logit;
  if (s == "probit") return Link::probit;
  if (s == "cloglog") return Link::cloglog;
  throw config_error("unknown link '" + name + "'");
}

std::string to_string(Family f) {
  switch (f) {
    case Family::gaussian: return "gaussian";
    case Family::poisson: return "poisson";
    case Family::gamma: return "gamma";
    case Family::inverse_gaussian: return "inverse-gaussian";
    case Family::negative_binomial: return "negative-binomial";
    case Family::binomial: return "binomial";
  }
  return "?";
}

std::string to_string(Link l) {
  switch (l) {
    case Link::identity: return "identity";
    case Link::inverse: return "inverse";
    case Link::log: return "log";
    case Link::sqrt: return "sqrt";
    case Link::logit: return "logit";
    case Link::probit: return "probit";
    case Link::cloglog: return "cloglog";
  }
  return "?";
}

Combination validate_combination(Family f, Link l) {
  const bool prob = is_probability_link(l);
  switch (f) {
    case Family::gaussian:
      if (prob) return Combination::forbidden;
      return (l == Link::identity || l == Link::inverse) ? Combination::ok : Combination::warn;
    case Family::poisson:
    case Family::gamma:
    case Family::inverse_gaussian:
      if (prob) return Combination::forbidden;
      return (l == Link::log || l == Link::sqrt) ? Combination::ok : Combination::warn;
    case Family::negative_binomial:
      return (l == Link::identity || l == Link::inverse) ? Combination::forbidden : Combination::ok;
    case Family::binomial:
      return prob ? Combination::ok : Combination::forbidden;
  }
  return Combination::forbidden;
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    return kNaN;
  }
  // Rational approximation (Acklam), then Halley refinement against erfc.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01, -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double lo = 0.02425;
  double x;
  if (p < lo) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - lo) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  for (int it = 0; it < 2; ++it) {
    const double e = std_normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

Deriv2 inverse_link(Link l, double y) {
  switch (l) {
    case Link::identity: return {y, 1.0, 0.0};
    case Link::inverse: return {1.0 / y, -1.0 / (y * y), 2.0 / (y * y * y)};
    case Link::log: {
      const double e = std::exp(y);
      return {e, e, e};
    }
    case Link::sqrt: return {y * y, 2.0 * y, 2.0};
    default: {
      const ProbLink p = prob_link(l, y);
      return {p.pi, p.d1, p.d2};
    }
  }
}

double link_fn(Link l, double mu) {
  switch (l) {
    case Link::identity: return mu;
    case Link::inverse: return 1.0 / mu;
    case Link::log: return std::log(mu);
    case Link::sqrt: return std::sqrt(mu);
    case Link::logit: return std::log(mu / (1.0 - mu));
    case Link::probit: return std_normal_quantile(mu);
    case Link::cloglog: return std::log(-std::log1p(-mu));
  }
  return kNaN;
}

namespace {

void require_size(Family f, double k) {
  if (std::isnan(k)) throw config_error("size parameter k is missing for the " + to_string(f) + " family");
  if (k < 0.0) throw domain_error("size parameter k must be >= 0");
}

}  // namespace

Deriv2 mean_derivs(double y, Link l, Family f, double k) {
  if (!has_size(f)) return inverse_link(l, y);
  require_size(f, k);
  if (!is_probability_link(l)) {
    const Deriv2 g = inverse_link(l, y);
    return {k * g.value, k * g.d1, k * g.d2};
  }
  const ProbLink p = prob_link(l, y);
  if (f == Family::binomial) return {k * p.pi, k * p.d1, k * p.d2};
  // negative-binomial: mu = k (1 - pi) / pi
  if (l == Link::logit) {
    const double e = k * std::exp(-y);
    return {e, -e, e};
  }
  const double pi2 = p.pi * p.pi;
  return {k * p.q / p.pi, -k * p.d1 / pi2, -k * (p.d2 / pi2 - 2.0 * p.d1 * p.d1 / (pi2 * p.pi))};
}

double prob_from_mean(Family f, double mu, double k) {
  switch (f) {
    case Family::binomial: return mu / k;
    case Family::negative_binomial: return k / (mu + k);
    default: return kNaN;
  }
}

MeanProb mean_from_latent(double y, Link l, Family f, double k) {
  if (!has_size(f)) return {inverse_link(l, y).value, kNaN};
  require_size(f, k);
  if (is_probability_link(l)) {
    const ProbLink p = prob_link(l, y);
    if (f == Family::binomial) return {k * p.pi, p.pi};
    return {k * p.q / p.pi, p.pi};
  }
  const double mu = k * inverse_link(l, y).value;
  return {mu, prob_from_mean(f, mu, k)};
}

void check_support(Family f, double z, double k) {
  auto fail = [&](const char* why) {
    throw domain_error("datum " + std::to_string(z) + " is outside the support of the " + to_string(f) +
                       " family (" + why + ")");
  };
  if (!std::isfinite(z)) fail("not finite");
  switch (f) {
    case Family::gaussian: return;
    case Family::gamma:
    case Family::inverse_gaussian:
      if (!(z > 0.0)) fail("must be > 0");
      return;
    case Family::poisson:
    case Family::negative_binomial:
      if (z < 0.0 || z != std::floor(z)) fail("must be a non-negative integer");
      return;
    case Family::binomial:
      if (z < 0.0 || z != std::floor(z)) fail("must be a non-negative integer");
      if (!std::isnan(k) && z > k) fail("exceeds the size parameter");
      return;
  }
}

Deriv2 log_density(Family f, double z, double mu, double psi, double k) {
  if (!std::isfinite(mu)) return invalid();
  switch (f) {
    case Family::gaussian: {
      const double r = z - mu;
      return {-0.5 * std::log(2.0 * std::numbers::pi * psi) - r * r / (2.0 * psi), r / psi, -1.0 / psi};
    }
    case Family::poisson: {
      if (!(mu > 0.0)) return invalid();
      const double v = (z == 0.0 ? 0.0 : z * std::log(mu)) - mu - std::lgamma(z + 1.0);
      return {v, z / mu - 1.0, -z / (mu * mu)};
    }
    case Family::gamma: {
      if (!(mu > 0.0)) return invalid();
      const double a = 1.0 / psi;
      const double v = a * std::log(a) - std::lgamma(a) + (a - 1.0) * std::log(z) - a * std::log(mu) - a * z / mu;
      return {v, a * (z / (mu * mu) - 1.0 / mu), a * (1.0 / (mu * mu) - 2.0 * z / (mu * mu * mu))};
    }
    case Family::inverse_gaussian: {
      if (!(mu > 0.0)) return invalid();
      const double lam = 1.0 / psi;
      const double r = z - mu;
      const double v = 0.5 * std::log(lam / (2.0 * std::numbers::pi * z * z * z)) - lam * r * r / (2.0 * mu * mu * z);
      const double mu2 = mu * mu;
      return {v, lam * (z / (mu2 * mu) - 1.0 / mu2), lam * (2.0 / (mu2 * mu) - 3.0 * z / (mu2 * mu2))};
    }
    case Family::negative_binomial: {
      require_size(f, k);
      if (!(mu > 0.0) || !(k > 0.0)) return invalid();
      const double v = std::lgamma(z + k) - std::lgamma(k) - std::lgamma(z + 1.0) + k * std::log(k / (mu + k)) +
                       (z == 0.0 ? 0.0 : z * std::log(mu / (mu + k)));
      const double s = mu + k;
      return {v, z / mu - (z + k) / s, -z / (mu * mu) + (z + k) / (s * s)};
    }
    case Family::binomial: {
      require_size(f, k);
      if (!(k > 0.0)) return invalid();
      const double pi = mu / k;
      if (!(pi > 0.0 && pi < 1.0)) return invalid();
      const double q = 1.0 - pi;
      const double v = std::lgamma(k + 1.0) - std::lgamma(z + 1.0) - std::lgamma(k - z + 1.0) +
                       (z == 0.0 ? 0.0 : z * std::log(pi)) + (k - z == 0.0 ? 0.0 : (k - z) * std::log1p(-pi));
      return {v, (z / pi - (k - z) / q) / k, -(z / (pi * pi) + (k - z) / (q * q)) / (k * k)};
    }
  }
  return invalid();
}

double fisher_information(Family f, double mu, double psi, double k) {
  switch (f) {
    case Family::gaussian: return 1.0 / psi;
    case Family::poisson: return 1.0 / mu;
    case Family::gamma: return 1.0 / (psi * mu * mu);
    case Family::inverse_gaussian: return 1.0 / (psi * mu * mu * mu);
    case Family::negative_binomial: return k / (mu * (mu + k));
    case Family::binomial: return k / (mu * (k - mu));
  }
  return kNaN;
}

namespace {

// Integer draws stop being meaningful far before the sampler's long long range; the normal limit is exact there.
double poisson_draw(double mean, std::mt19937_64& rng) {
  if (!(mean > 0.0)) return 0.0;
  if (std::isinf(mean)) return mean;
  if (mean > 1e12) return std::max(0.0, std::round(std::normal_distribution<double>(mean, std::sqrt(mean))(rng)));
  return static_cast<double>(std::poisson_distribution<long long>(mean)(rng));
}

}  // namespace

double sample_family(Family f, double mu, double psi, double k, std::mt19937_64& rng) {
  switch (f) {
    case Family::gaussian: return std::normal_distribution<double>(mu, std::sqrt(psi))(rng);
    case Family::poisson:
      return poisson_draw(mu, rng);
    case Family::gamma: return std::gamma_distribution<double>(1.0 / psi, mu * psi)(rng);
    case Family::inverse_gaussian: {
      const double lam = 1.0 / psi;
      const double nu = std::normal_distribution<double>(0.0, 1.0)(rng);
      const double y = nu * nu;
      const double x = mu + mu * mu * y / (2.0 * lam) -
                       mu / (2.0 * lam) * std::sqrt(4.0 * mu * lam * y + mu * mu * y * y);
      const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      return u <= mu / (mu + x) ? x : mu * mu / x;
    }
    case Family::negative_binomial: {
      if (!(mu > 0.0) || !(k > 0.0)) return 0.0;
      const double lam = std::gamma_distribution<double>(k, mu / k)(rng);
      return poisson_draw(lam, rng);
    }
    case Family::binomial: {
      const auto trials = static_cast<long long>(std::llround(k));
      const double pi = std::clamp(mu / k, 0.0, 1.0);
      if (trials <= 0) return 0.0;
      return static_cast<double>(std::binomial_distribution<long long>(trials, pi)(rng));
    }
  }
  return kNaN;
}

}  // namespace frk
