#include "frk/predict.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>

#include "frk/error.hpp"

namespace frk {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr char kMagic[8] = {'F', 'R', 'K', 'S', 'M', 'P', '0', '1'};

}  // namespace

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t col) { return splitmix64(splitmix64(seed) ^ col); }

Eigen::MatrixXd sample_latent(const ModelStructures& s, const ModelState& theta, const LaplaceResult& lr, int n_mc,
                              std::uint64_t seed) {
  if (n_mc < 1) throw config_error("n_MC must be >= 1");
  const int p = s.n_random();
  if (p > 0 && !lr.hess_factor) throw state_error("prediction needs the Hessian factor of a completed fit");
  const int n = s.grid().size();
  const int r = s.n_basis();
  const bool fs = s.spec().fine_scale;
  const Eigen::VectorXd fs_var = fs ? expand_fs_variances(s.grid(), s.spec().fs_by_spatial_bau, theta.sigma2fs)
                                    : Eigen::VectorXd::Zero(n);
  std::vector<int> local(static_cast<std::size_t>(n), -1);
  for (int a = 0; a < s.n_touched(); ++a) local[static_cast<std::size_t>(s.touched()[static_cast<std::size_t>(a)])] = a;

  const Eigen::VectorXd base = s.grid().covariates() * theta.alpha;
  Eigen::MatrixXd y(n, n_mc);
  kernels::omp::for_each_column(n_mc, [&](Eigen::Index c) {
    std::mt19937_64 rng(stream_seed(seed, static_cast<std::uint64_t>(c)));
    std::normal_distribution<double> norm(0.0, 1.0);
    Eigen::VectorXd u = lr.u_hat;
    if (p > 0) {
      Eigen::VectorXd z(p);
      for (int i = 0; i < p; ++i) z[i] = norm(rng);
      const Eigen::VectorXd w = lr.hess_factor->matrixU().solve(z);
      u += Eigen::VectorXd(lr.hess_factor->permutationPinv() * w);
    }
    Eigen::VectorXd col = base;
    if (r > 0) col += s.s_full() * u.head(r);
    if (fs) {
      for (int i = 0; i < n; ++i) {
        const int a = local[static_cast<std::size_t>(i)];
        col[i] += a >= 0 ? u[r + a] : std::sqrt(fs_var[i]) * norm(rng);
      }
    }
    y.col(c) = col;
  });
  return y;
}

Targets transform_targets(const Eigen::MatrixXd& y, Family f, Link l, const std::optional<Eigen::VectorXd>& k) {
  Targets t;
  const Eigen::Index rows = y.rows();
  const Eigen::Index cols = y.cols();
  if (!has_size(f)) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index i = 0; i < rows; ++i) m(i, c) = inverse_link(l, y(i, c)).value;
    }
    t.mu = std::move(m);
    return t;
  }
  if (k && k->size() != rows) throw config_error("size parameters: one per row is required");
  Eigen::MatrixXd pi(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double g = inverse_link(l, y(i, c)).value;
      // negative-binomial with log/sqrt: pi = k / (k g + k) = 1 / (1 + g), free of k
      pi(i, c) = is_probability_link(l) ? g : 1.0 / (1.0 + g);
    }
  }
  t.pi = std::move(pi);
  if (!k) {
    t.warnings.push_back("size parameters are missing: the mean is omitted and only probabilities are returned");
    return t;
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, c) = mean_from_latent(y(i, c), l, f, (*k)[i]).mu;
  }
  t.mu = std::move(m);
  return t;
}

RegionSamples aggregate_regions(const Eigen::MatrixXd& m, const IncidenceMatrix& cp, Family f,
                                const std::optional<Eigen::VectorXd>& k) {
  RegionSamples out;
  out.mu = cp.weights * m;
  if (has_size(f) && k) {
    const Eigen::VectorXd kp = cp.weights * (*k);
    Eigen::MatrixXd pi(out.mu.rows(), out.mu.cols());
    for (Eigen::Index c = 0; c < pi.cols(); ++c) {
      for (Eigen::Index i = 0; i < pi.rows(); ++i) pi(i, c) = prob_from_mean(f, out.mu(i, c), kp[i]);
    }
    out.pi = std::move(pi);
    out.k = kp;
  }
  return out;
}

Eigen::MatrixXd sample_predictive_data(const Eigen::MatrixXd& m, Family f, double psi,
                                       const std::optional<Eigen::VectorXd>& k, std::uint64_t seed) {
  if (has_size(f) && !k) throw config_error("size parameters are required to sample " + to_string(f) + " data");
  Eigen::MatrixXd z(m.rows(), m.cols());
  kernels::omp::for_each_column(m.cols(), [&](Eigen::Index c) {
    std::mt19937_64 rng(stream_seed(seed ^ 0x5bd1e995ULL, static_cast<std::uint64_t>(c)));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double ki = k ? (*k)[i] : std::nan("");
      z(i, c) = (f == Family::gaussian && psi == 0.0) ? m(i, c) : sample_family(f, m(i, c), psi, ki, rng);
    }
  });
  return z;
}

kernels::Summary summarize(const Eigen::MatrixXd& samples, const std::vector<double>& percentiles) {
  for (double p : percentiles) {
    if (!(p >= 0.0 && p <= 100.0)) {
      throw config_error("percentiles must lie in [0, 100] (got " + std::to_string(p) + ")");
    }
  }
  if (samples.cols() < 1) throw config_error("summaries need at least one sample column");
  return kernels::omp::summarize_rows(samples, percentiles);
}

std::string to_string(Target t) {
  switch (t) {
    case Target::latent: return "Y";
    case Target::mean: return "mu";
    case Target::prob: return "pi";
    case Target::data: return "Z";
  }
  return "?";
}

const TargetSummary* PredictionResult::find(Target t) const {
  for (const auto& s : summaries) {
    if (s.target == t) return &s;
  }
  return nullptr;
}

PredictionResult predict(const ModelStructures& s, const FitResult& fit, const PredictOptions& opts,
                         const SupportSet* regions) {
  const auto& spec = s.spec();
  PredictionResult out;
  out.percentiles = opts.percentiles;
  // validate percentiles before the expensive part
  summarize(Eigen::MatrixXd::Zero(1, 1), opts.percentiles);

  const Eigen::MatrixXd y = sample_latent(s, fit.theta, fit.laplace, opts.n_mc, opts.seed);
  const std::optional<Eigen::VectorXd>& k = s.grid().size_params();
  Targets t = transform_targets(y, spec.family, spec.link, has_size(spec.family) ? k : std::nullopt);
  out.warnings = t.warnings;
  const std::uint64_t data_seed = splitmix64(opts.seed + 1);

  if (!regions) {
    out.n_locations = s.grid().size();
    out.summaries.push_back({Target::latent, summarize(y, opts.percentiles)});
    if (t.mu) out.summaries.push_back({Target::mean, summarize(*t.mu, opts.percentiles)});
    if (t.pi) out.summaries.push_back({Target::prob, summarize(*t.pi, opts.percentiles)});
    if (t.mu) {
      const Eigen::MatrixXd z = sample_predictive_data(*t.mu, spec.family, fit.theta.psi, k, data_seed);
      out.summaries.push_back({Target::data, summarize(z, opts.percentiles)});
    }
    if (opts.keep_samples) {
      out.y_mc = y;
      if (t.mu) out.m = *t.mu;
    }
    return out;
  }

  out.regions = true;
  out.n_locations = static_cast<int>(regions->size());
  if (!t.mu) {
    out.warnings.push_back("region predictions need BAU means; size parameters are missing");
    return out;
  }
  const IncidenceMatrix cp = build_incidence(s.grid(), *regions, spec.normalise_wts, has_size(spec.family));
  const RegionSamples rs = aggregate_regions(*t.mu, cp, spec.family, has_size(spec.family) ? k : std::nullopt);
  out.summaries.push_back({Target::mean, summarize(rs.mu, opts.percentiles)});
  if (rs.pi) out.summaries.push_back({Target::prob, summarize(*rs.pi, opts.percentiles)});
  const Eigen::MatrixXd z = sample_predictive_data(rs.mu, spec.family, fit.theta.psi, rs.k, data_seed);
  out.summaries.push_back({Target::data, summarize(z, opts.percentiles)});
  if (opts.keep_samples) {
    out.y_mc = y;
    out.m = *t.mu;
    out.m_p = rs.mu;
  }
  return out;
}

void write_samples(std::ostream& os, const Eigen::MatrixXd& m) {
  os.write(kMagic, sizeof kMagic);
  const auto rows = static_cast<std::uint32_t>(m.rows());
  const auto cols = static_cast<std::uint32_t>(m.cols());
  os.write(reinterpret_cast<const char*>(&rows), sizeof rows);
  os.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!os) throw io_error("failed to write sample matrix");
}

Eigen::MatrixXd read_samples(std::istream& is) {
  char magic[8];
  std::uint32_t rows = 0, cols = 0;
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) throw io_error("sample dump: bad magic");
  is.read(reinterpret_cast<char*>(&rows), sizeof rows);
  is.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!is) throw io_error("sample dump: truncated header");
  Eigen::MatrixXd m(rows, cols);
  is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!is) throw io_error("sample dump: truncated data");
  return m;
}

}  // namespace frk
