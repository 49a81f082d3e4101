#include "frk/app/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "frk/diagnostics.hpp"
#include "frk/error.hpp"

namespace frk::app {

namespace {

using nlohmann::json;

constexpr char kFitMagic[8] = {'F', 'R', 'K', 'F', 'I', 'T', '0', '1'};

class Writer {
 public:
  template <class T>
  void pod(T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out_.append(b, sizeof(T));
  }
  void vec(const std::vector<double>& v) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(v.size()));
    for (double x : v) pod(x);
  }
  void vec(const Eigen::VectorXd& v) { vec(std::vector<double>(v.data(), v.data() + v.size())); }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  template <class T>
  T pod() {
    if (pos_ + sizeof(T) > s_.size()) throw io_error("fit state: truncated file");
    T v;
    std::memcpy(&v, s_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::vector<double> vec() {
    const auto n = pod<std::uint32_t>();
    if (pos_ + n * sizeof(double) > s_.size()) throw io_error("fit state: truncated file");
    std::vector<double> v(n);
    for (auto& x : v) x = pod<double>();
    return v;
  }
  Eigen::VectorXd evec() {
    const auto v = vec();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::filesystem::path timing_path(const RunConfig& cfg) { return cfg.paths.out_dir / "timing.json"; }

void record_timing(const RunConfig& cfg, const std::string& key, double secs) {
  json j = json::object();
  const auto p = timing_path(cfg);
  if (std::filesystem::exists(p)) {
    try {
      j = json::parse(read_file(p));
    } catch (const json::parse_error&) {
      j = json::object();
    }
  }
  j[key] = secs;
  write_atomic(p, j.dump(2) + "\n");
}

std::filesystem::path samples_path(const RunConfig& cfg, const std::string& target) {
  return cfg.paths.out_dir / ("samples_" + target + ".bin");
}

std::string column_name(double q) { return "p" + fmt(q); }

double back_transform(Transform t, double x) {
  switch (t) {
    case Transform::identity: return x;
    case Transform::log: return std::exp(x);
    case Transform::atanh: return std::tanh(x);
  }
  return x;
}

std::string transform_name(Transform t) {
  switch (t) {
    case Transform::identity: return "identity";
    case Transform::log: return "log";
    case Transform::atanh: return "atanh";
  }
  return "?";
}

bool same_spec(const ModelSpec& a, const ModelSpec& b) {
  return a.family == b.family && a.link == b.link && a.prior == b.prior && a.taper_multiplier == b.taper_multiplier &&
         a.fs_by_spatial_bau == b.fs_by_spatial_bau && a.fine_scale == b.fine_scale &&
         a.normalise_wts == b.normalise_wts;
}

// viridis, nine evenly spaced stops
constexpr unsigned char kViridis[9][3] = {{0x44, 0x01, 0x54}, {0x47, 0x2d, 0x7b}, {0x3b, 0x52, 0x8b},
                                          {0x2c, 0x72, 0x8e}, {0x21, 0x91, 0x8c}, {0x28, 0xae, 0x80},
                                          {0x5e, 0xc9, 0x62}, {0xad, 0xdc, 0x30}, {0xfd, 0xe7, 0x25}};

void colour(double f, unsigned char* rgb) {
  f = std::clamp(f, 0.0, 1.0) * 8.0;
  const int i = std::min(7, static_cast<int>(f));
  const double w = f - i;
  for (int c = 0; c < 3; ++c) {
    rgb[c] = static_cast<unsigned char>(std::lround((1.0 - w) * kViridis[i][c] + w * kViridis[i + 1][c]));
  }
}

}  // namespace

BauGrid make_grid(const RunConfig& cfg) {
  BauGrid g = build_bau_grid(cfg.grid.bbox, cfg.grid.nx, cfg.grid.ny, cfg.grid.time_bins);
  if (cfg.grid.size_param) g.set_size_params(Eigen::VectorXd::Constant(g.size(), *cfg.grid.size_param));
  return g;
}

BasisSet make_basis(const RunConfig& cfg, const BauGrid& grid) {
  BasisSet b = auto_basis(grid.bbox(), cfg.model.n_res);
  if (grid.n_time() == 1) return b;
  if (cfg.model.temporal_basis < 1) {
    throw config_error("config: model.temporal_basis must be >= 1 when grid.time_bins > 1");
  }
  return tensor_basis(b, temporal_basis(0.0, grid.n_time() - 1.0, cfg.model.temporal_basis));
}

ModelSpec make_spec(const RunConfig& cfg) {
  ModelSpec s;
  s.family = cfg.model.family;
  s.link = cfg.model.link;
  s.prior = cfg.model.prior;
  s.taper_multiplier = cfg.model.taper_multiplier;
  s.fs_by_spatial_bau = cfg.model.fs_by_spatial_bau;
  s.fine_scale = cfg.model.fine_scale;
  s.normalise_wts = cfg.model.aggregation == "average";
  return s;
}

ModelStructures make_structures(const RunConfig& cfg, const std::vector<DataRow>& data) {
  BauGrid grid = make_grid(cfg);
  if (has_size(cfg.model.family) && !grid.size_params()) {
    throw config_error("config: grid.size_param is required for family " + to_string(cfg.model.family));
  }
  BasisSet basis = make_basis(cfg, grid);
  std::vector<Support> geoms;
  Eigen::VectorXd z(static_cast<Eigen::Index>(data.size()));
  for (std::size_t j = 0; j < data.size(); ++j) {
    geoms.push_back(data[j].geom);
    z[static_cast<Eigen::Index>(j)] = data[j].z;
  }
  SupportSet sup;
  try {
    sup = map_supports(grid, geoms);
  } catch (const Error& e) {
    throw Error(e.kind(), cfg.paths.data.string() + ": " + e.what());
  }
  ModelStructures s(std::move(grid), std::move(basis), ObservationSet{z, std::move(sup)}, make_spec(cfg));
  if (has_size(cfg.model.family)) {
    const Eigen::VectorXd& kz = s.k_obs_support();
    for (std::size_t j = 0; j < data.size(); ++j) {
      if (!data[j].k) continue;
      const double want = kz[static_cast<Eigen::Index>(j)];
      if (std::abs(*data[j].k - want) > 1e-9 * std::max(1.0, want)) {
        throw domain_error(cfg.paths.data.string() + " row " + std::to_string(j + 1) + ": k = " + fmt(*data[j].k) +
                           " differs from the summed BAU sizes " + fmt(want));
      }
    }
  }
  return s;
}

std::string encode_fit_state(const FitState& st) {
  Writer w;
  w.bytes().append(kFitMagic, sizeof kFitMagic);
  w.pod<std::int32_t>(static_cast<std::int32_t>(st.spec.family));
  w.pod<std::int32_t>(static_cast<std::int32_t>(st.spec.link));
  w.pod<std::int32_t>(static_cast<std::int32_t>(st.spec.prior));
  w.pod(st.spec.taper_multiplier);
  w.pod<std::uint8_t>(st.spec.fs_by_spatial_bau);
  w.pod<std::uint8_t>(st.spec.fine_scale);
  w.pod<std::uint8_t>(st.spec.normalise_wts);
  w.pod<std::int32_t>(st.n_bau);
  w.pod<std::int32_t>(st.n_basis);
  w.pod<std::int32_t>(st.n_obs);
  const ModelState& th = st.theta;
  w.vec(th.alpha);
  w.pod<std::int32_t>(static_cast<std::int32_t>(th.prior.type));
  w.vec(th.prior.sigma2);
  w.vec(th.prior.tau);
  w.vec(th.prior.kappa);
  w.vec(th.prior.rho);
  w.pod(th.prior.taper_multiplier);
  w.pod(th.prior.rho_t);
  w.vec(th.sigma2fs);
  w.pod(th.psi);
  w.vec(st.u_hat);
  w.pod(st.loglik);
  return std::move(w.bytes());
}

FitState decode_fit_state(const std::string& bytes) {
  if (bytes.size() < sizeof kFitMagic || std::memcmp(bytes.data(), kFitMagic, sizeof kFitMagic) != 0) {
    throw io_error("fit state: not a fit state file (bad magic)");
  }
  Reader r(bytes);
  for (std::size_t i = 0; i < sizeof kFitMagic; ++i) r.pod<char>();
  FitState st;
  st.spec.family = static_cast<Family>(r.pod<std::int32_t>());
  st.spec.link = static_cast<Link>(r.pod<std::int32_t>());
  st.spec.prior = static_cast<PriorType>(r.pod<std::int32_t>());
  st.spec.taper_multiplier = r.pod<double>();
  st.spec.fs_by_spatial_bau = r.pod<std::uint8_t>() != 0;
  st.spec.fine_scale = r.pod<std::uint8_t>() != 0;
  st.spec.normalise_wts = r.pod<std::uint8_t>() != 0;
  st.n_bau = r.pod<std::int32_t>();
  st.n_basis = r.pod<std::int32_t>();
  st.n_obs = r.pod<std::int32_t>();
  ModelState& th = st.theta;
  th.alpha = r.evec();
  th.prior.type = static_cast<PriorType>(r.pod<std::int32_t>());
  th.prior.sigma2 = r.vec();
  th.prior.tau = r.vec();
  th.prior.kappa = r.vec();
  th.prior.rho = r.vec();
  th.prior.taper_multiplier = r.pod<double>();
  th.prior.rho_t = r.pod<double>();
  th.sigma2fs = r.evec();
  th.psi = r.pod<double>();
  st.u_hat = r.evec();
  st.loglik = r.pod<double>();
  if (!r.done()) throw io_error("fit state: trailing bytes");
  return st;
}

LaplaceResult reload_laplace(const ModelStructures& s, const FitState& st) {
  if (!same_spec(s.spec(), st.spec)) throw state_error("fit state: model settings differ from the config");
  if (st.n_bau != s.grid().size() || st.n_basis != s.n_basis() || st.n_obs != s.n_obs() ||
      st.u_hat.size() != s.n_random()) {
    throw state_error("fit state: stored dimensions (N=" + std::to_string(st.n_bau) + ", r=" +
                      std::to_string(st.n_basis) + ", m=" + std::to_string(st.n_obs) +
                      ") do not match the config and data (N=" + std::to_string(s.grid().size()) + ", r=" +
                      std::to_string(s.n_basis()) + ", m=" + std::to_string(s.n_obs()) + ")");
  }
  return laplace_objective(s, st.theta, st.u_hat);
}

std::string report_json(const FitResult& r, const ModelStructures& s) {
  const FitReport& rep = r.report;
  const ThetaCodec codec(s, r.theta, FitOptions{}, rep.sigma2fs.fixed);
  const Eigen::VectorXd x = codec.encode_all(r.theta);
  json params = json::array();
  for (std::size_t i = 0; i < rep.params.size() && i < static_cast<std::size_t>(x.size()); ++i) {
    const ParamInfo& p = rep.params[i];
    const double xi = x[static_cast<Eigen::Index>(i)];
    params.push_back({{"name", p.name},
                      {"transform", transform_name(p.transform)},
                      {"fixed", p.fixed},
                      {"value", back_transform(p.transform, xi)},
                      {"transformed", xi}});
  }
  json j;
  j["family"] = to_string(s.spec().family);
  j["link"] = to_string(s.spec().link);
  j["prior"] = to_string(s.spec().prior);
  j["n_obs"] = s.n_obs();
  j["n_basis"] = s.n_basis();
  j["n_bau"] = s.grid().size();
  j["converged"] = rep.converged;
  j["iterations"] = rep.iterations;
  j["evaluations"] = rep.evaluations;
  j["grad_norm"] = rep.grad_norm;
  j["loglik"] = r.laplace.loglik;
  j["trace"] = rep.trace;
  j["parameters"] = params;
  j["sigma2fs_rule"] = {{"fixed", rep.sigma2fs.fixed}, {"rough", rep.sigma2fs.rough}, {"value", rep.sigma2fs.value}};
  j["resid_var"] = rep.resid_var;
  j["warnings"] = rep.warnings;
  return j.dump(2) + "\n";
}

std::vector<std::string> cmd_simulate(const RunConfig& cfg) {
  const Simulation sim = simulate(cfg);
  write_atomic(cfg.paths.data, format_data(sim.data));
  write_atomic(cfg.paths.truth, format_truth(sim.truth));
  return {};
}

std::vector<std::string> cmd_fit(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelStructures s = make_structures(cfg, read_data(cfg.paths.data));
  FitOptions opts;
  opts.known_sigma2fs = cfg.model.known_sigma2fs;
  opts.known_psi = cfg.model.known_psi;
  opts.max_iter = cfg.fit.max_iter;
  opts.obj_tol = cfg.fit.obj_tol;
  opts.grad_tol = cfg.fit.grad_tol;
  FitResult fr = fit(s, opts);
  // settle the mode once more so a reload from the stored mode is a fixed point
  fr.laplace = laplace_objective(s, fr.theta, fr.laplace.u_hat);
  FitState st{s.spec(), s.grid().size(), s.n_basis(), s.n_obs(), fr.theta, fr.laplace.u_hat, fr.laplace.loglik};
  write_atomic_binary(cfg.paths.fit_state, encode_fit_state(st));
  write_atomic(cfg.paths.report, report_json(fr, s));
  record_timing(cfg, "fit_s", seconds_since(t0));
  return fr.report.warnings;
}

std::vector<std::string> cmd_predict(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelStructures s = make_structures(cfg, read_data(cfg.paths.data));
  const FitState st = decode_fit_state(read_file(cfg.paths.fit_state));
  FitResult fr;
  fr.theta = st.theta;
  fr.laplace = reload_laplace(s, st);
  std::vector<std::string> warnings;
  if (fr.laplace.loglik != st.loglik) {
    warnings.push_back("reloaded log-likelihood " + fmt(fr.laplace.loglik) + " differs from the stored " +
                       fmt(st.loglik));
  }

  std::optional<SupportSet> regions;
  std::vector<int> ids;
  if (!cfg.paths.regions.empty()) {
    const auto reg = read_regions(cfg.paths.regions);
    std::vector<Support> geoms;
    for (const auto& r : reg) {
      geoms.push_back(r.geom);
      ids.push_back(r.id);
    }
    try {
      regions = map_supports(s.grid(), geoms, SupportKind::prediction);
    } catch (const Error& e) {
      throw Error(e.kind(), cfg.paths.regions.string() + ": " + e.what());
    }
  } else {
    for (int i = 0; i < s.grid().size(); ++i) ids.push_back(i);
  }

  PredictOptions po;
  po.n_mc = cfg.predict.n_mc;
  po.seed = cfg.seed.value_or(1);
  po.percentiles = cfg.predict.percentiles;
  po.keep_samples = !cfg.predict.sample_target.empty();
  const PredictionResult pr = predict(s, fr, po, regions ? &*regions : nullptr);
  warnings.insert(warnings.end(), pr.warnings.begin(), pr.warnings.end());

  std::ostringstream os;
  os << "id,target,mean,sd";
  for (double q : pr.percentiles) os << ',' << column_name(q);
  os << '\n';
  for (const auto& ts : pr.summaries) {
    const std::string name = to_string(ts.target);
    for (Eigen::Index i = 0; i < ts.table.rows(); ++i) {
      os << ids[static_cast<std::size_t>(i)] << ',' << name;
      for (Eigen::Index c = 0; c < ts.table.cols(); ++c) os << ',' << fmt(ts.table(i, c));
      os << '\n';
    }
  }
  write_atomic(cfg.paths.predictions, os.str());

  const std::string& want = cfg.predict.sample_target;
  if (!want.empty()) {
    std::optional<Eigen::MatrixXd> dump;
    const auto& k = s.grid().size_params();
    if (want == "Y" && !regions) {
      dump = pr.y_mc;
    } else if (want == "mu") {
      dump = regions ? pr.m_p : pr.m;
    } else if (want == "pi" && has_size(s.spec().family) && pr.m) {
      if (regions) {
        const IncidenceMatrix cp = build_incidence(s.grid(), *regions, s.spec().normalise_wts, true);
        dump = aggregate_regions(*pr.m, cp, s.spec().family, k).pi;
      } else if (pr.y_mc) {
        dump = transform_targets(*pr.y_mc, s.spec().family, s.spec().link, k).pi;
      }
    }
    if (dump) {
      std::ostringstream bin;
      write_samples(bin, *dump);
      write_atomic_binary(samples_path(cfg, want), bin.str());
    } else {
      warnings.push_back("predict.sample_target " + want + " is not available for this prediction; no samples written");
    }
  }

  if (cfg.predict.plots && !regions) {
    const int px = std::max(1, 256 / std::max(s.grid().nx(), s.grid().ny()));
    for (const auto& ts : pr.summaries) {
      const std::string name = to_string(ts.target);
      write_atomic_binary(cfg.paths.out_dir / ("map_" + name + "_mean.ppm"), render_ppm(s.grid(), ts.table.col(0), px));
      if (pr.percentiles.size() >= 2) {
        const Eigen::VectorXd width = ts.table.col(ts.table.cols() - 1) - ts.table.col(2);
        write_atomic_binary(cfg.paths.out_dir / ("map_" + name + "_width.ppm"), render_ppm(s.grid(), width, px));
      }
    }
  }
  record_timing(cfg, "predict_s", seconds_since(t0));
  return warnings;
}

Scores score_files(const RunConfig& cfg) {
  const std::string& target = cfg.score.target;
  if (target == "Z") throw config_error("config: score.target Z has no withheld truth; use Y, mu or pi");
  const auto truth = read_truth(cfg.paths.truth);
  std::map<int, const TruthRow*> by_id;
  for (const auto& t : truth) {
    if (!by_id.emplace(t.id, &t).second) throw io_error(cfg.paths.truth.string() + ": duplicate id " + std::to_string(t.id));
  }

  const Table pred = read_csv(cfg.paths.predictions);
  const int c_id = pred.col("id"), c_target = pred.col("target"), c_mean = pred.col("mean");
  if (c_id < 0 || c_target < 0 || c_mean < 0) {
    throw io_error(cfg.paths.predictions.string() + ": needs columns id, target and mean");
  }
  const double lo_q = 50.0 * cfg.score.alpha, hi_q = 100.0 - lo_q;
  int c_lo = -1, c_hi = -1;
  for (std::size_t c = 0; c < pred.header.size(); ++c) {
    const std::string& h = pred.header[c];
    if (h.size() < 2 || h[0] != 'p') continue;
    double q = 0.0;
    try {
      q = std::stod(h.substr(1));
    } catch (const std::exception&) {
      continue;
    }
    if (std::abs(q - lo_q) < 1e-9) c_lo = static_cast<int>(c);
    if (std::abs(q - hi_q) < 1e-9) c_hi = static_cast<int>(c);
  }
  if (c_lo < 0 || c_hi < 0) {
    throw config_error("config: score.alpha = " + fmt(cfg.score.alpha) + " needs columns " + column_name(lo_q) +
                       " and " + column_name(hi_q) + " in the predictions; add them to predict.percentiles");
  }

  struct Row {
    int id;
    int location;
    double truth, mean, lo, hi;
  };
  std::vector<Row> rows;
  std::set<int> seen;
  int location = 0;
  for (std::size_t r = 0; r < pred.rows.size(); ++r) {
    if (pred.rows[r][static_cast<std::size_t>(c_target)] != target) continue;
    const int id = static_cast<int>(pred.required(r, c_id, "id"));
    const int loc = location++;
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw config_error(pred.where(r) + ": id " + std::to_string(id) + " has no row in " + cfg.paths.truth.string());
    }
    seen.insert(id);
    const TruthRow& t = *it->second;
    if (cfg.score.subset == "unobserved" && t.observed) continue;
    double tv = t.mu;
    if (target == "Y") tv = t.latent;
    if (target == "pi") {
      if (!t.pi) throw config_error(cfg.paths.truth.string() + ": id " + std::to_string(id) + " has no pi");
      tv = *t.pi;
    }
    rows.push_back({id, loc, tv, pred.required(r, c_mean, "mean"), pred.required(r, c_lo, pred.header[c_lo]),
                    pred.required(r, c_hi, pred.header[c_hi])});
  }
  if (location == 0) {
    throw config_error(cfg.paths.predictions.string() + ": no predictions for score.target " + target);
  }
  for (const auto& t : truth) {
    if (!seen.count(t.id)) {
      throw config_error("prediction and truth ids differ: truth id " + std::to_string(t.id) + " has no prediction");
    }
  }
  if (rows.empty()) throw config_error("score: the " + cfg.score.subset + " subset is empty");
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.id < b.id; });

  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::VectorXd tv(n), mean(n), lo(n), hi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Row& r = rows[static_cast<std::size_t>(i)];
    tv[i] = r.truth;
    mean[i] = r.mean;
    lo[i] = r.lo;
    hi[i] = r.hi;
  }
  Scores sc;
  sc.target = target;
  sc.subset = cfg.score.subset;
  sc.n = static_cast<int>(n);
  sc.rmspe = rmspe(tv, mean);
  sc.mae = mae(tv, mean);
  sc.mape = (tv.array() != 0.0).all() ? mape(tv, mean) : std::nan("");
  sc.is = interval_score(tv, lo, hi, cfg.score.alpha);
  sc.cvg = coverage(tv, lo, hi);

  const auto sp = samples_path(cfg, target);
  if (std::filesystem::exists(sp)) {
    std::ifstream in(sp, std::ios::binary);
    const Eigen::MatrixXd all = read_samples(in);
    if (all.rows() == location) {
      Eigen::MatrixXd sub(n, all.cols());
      for (Eigen::Index i = 0; i < n; ++i) sub.row(i) = all.row(rows[static_cast<std::size_t>(i)].location);
      sc.crps = crps_empirical(tv, sub);
    }
  }
  if (target == "pi" && (tv.array() == 0.0 || tv.array() == 1.0).all()) sc.brier = brier(tv, mean);
  if (cfg.score.wall_time && std::filesystem::exists(timing_path(cfg))) {
    try {
      const json j = json::parse(read_file(timing_path(cfg)));
      double total = 0.0;
      for (const auto& [k, v] : j.items()) {
        if (v.is_number()) total += v.get<double>();
      }
      sc.wall_time = total;
    } catch (const json::parse_error&) {
    }
  }
  return sc;
}

std::string format_scores(const Scores& s, const RunConfig& cfg, bool header) {
  std::ostringstream os;
  const std::string pct = fmt(100.0 * (1.0 - cfg.score.alpha));
  if (header) os << "run,target,subset,n,rmspe,mae,mape,crps,is" << pct << ",cvg" << pct << ",brier,wall_time_s\n";
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("NA"); };
  os << cfg.score.label << ',' << s.target << ',' << s.subset << ',' << s.n << ',' << fmt(s.rmspe) << ','
     << fmt(s.mae) << ',' << fmt(s.mape) << ',' << opt(s.crps) << ',' << fmt(s.is) << ',' << fmt(s.cvg) << ','
     << opt(s.brier) << ',' << opt(s.wall_time) << '\n';
  return os.str();
}

std::vector<std::string> cmd_score(const RunConfig& cfg) {
  const Scores s = score_files(cfg);
  const bool append = cfg.score.append && std::filesystem::exists(cfg.paths.scores);
  std::string content = append ? read_file(cfg.paths.scores) : std::string();
  content += format_scores(s, cfg, !append);
  write_atomic(cfg.paths.scores, content);
  std::vector<std::string> warnings;
  if (!s.crps) warnings.push_back("no samples for target " + s.target + "; crps reported as NA");
  return warnings;
}

std::string render_ppm(const BauGrid& grid, const Eigen::VectorXd& values, int cell_px) {
  if (values.size() != grid.size()) throw config_error("render_ppm: one value per BAU expected");
  if (cell_px < 1) throw config_error("render_ppm: cell_px must be >= 1");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const double span = hi > lo ? hi - lo : 1.0;
  const int gap = grid.n_time() > 1 ? cell_px : 0;
  const int slice_w = grid.nx() * cell_px;
  const int w = grid.n_time() * slice_w + (grid.n_time() - 1) * gap, h = grid.ny() * cell_px;
  std::string img = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  const std::size_t head = img.size();
  img.resize(head + 3 * static_cast<std::size_t>(w) * static_cast<std::size_t>(h), static_cast<char>(255));
  auto* px = reinterpret_cast<unsigned char*>(img.data() + head);
  for (int t = 0; t < grid.n_time(); ++t) {
    for (int s = 0; s < grid.n_spatial(); ++s) {
      const double v = values[grid.index(s, t)];
      unsigned char rgb[3] = {128, 128, 128};
      if (std::isfinite(v)) colour((v - lo) / span, rgb);
      const int row = s / grid.nx(), col = s % grid.nx();
      for (int dy = 0; dy < cell_px; ++dy) {
        for (int dx = 0; dx < cell_px; ++dx) {
          const std::size_t x = static_cast<std::size_t>(t * (slice_w + gap) + col * cell_px + dx);
          const std::size_t y = static_cast<std::size_t>(row * cell_px + dy);
          std::memcpy(px + 3 * (y * static_cast<std::size_t>(w) + x), rgb, 3);
        }
      }
    }
  }
  return img;
}

}  // namespace frk::app
