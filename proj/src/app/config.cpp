#include "frk/app/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "frk/error.hpp"

namespace frk::app {

namespace {

using nlohmann::json;

class Section {
 public:
  Section(const json& j, std::string path, std::set<std::string> allowed) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw config_error("config: " + label() + " must be an object");
    for (const auto& [k, v] : j_.items()) {
      if (!allowed.count(k)) throw config_error("config: unknown key '" + key(k) + "'");
    }
  }

  bool has(const std::string& k) const { return j_.contains(k) && !j_.at(k).is_null(); }
  const json& at(const std::string& k) const { return j_.at(k); }
  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  template <class F>
  void num(const std::string& k, F& out) const {
    if (!has(k)) return;
    const json& v = j_.at(k);
    if constexpr (std::is_integral_v<F>) {
      if (!v.is_number_integer()) throw config_error("config: " + key(k) + " must be an integer");
      if constexpr (std::is_unsigned_v<F>) {
        if (v.is_number_unsigned() || v.get<std::int64_t>() >= 0) {
          out = v.get<F>();
          return;
        }
        throw config_error("config: " + key(k) + " must be non-negative");
      } else {
        out = v.get<F>();
      }
    } else {
      if (!v.is_number()) throw config_error("config: " + key(k) + " must be a number");
      out = v.get<F>();
    }
  }

  template <class F>
  void opt_num(const std::string& k, std::optional<F>& out) const {
    if (!has(k)) return;
    F v{};
    num(k, v);
    out = v;
  }

  void flag(const std::string& k, bool& out) const {
    if (!has(k)) return;
    if (!j_.at(k).is_boolean()) throw config_error("config: " + key(k) + " must be true or false");
    out = j_.at(k).get<bool>();
  }

  void str(const std::string& k, std::string& out) const {
    if (!has(k)) return;
    if (!j_.at(k).is_string()) throw config_error("config: " + key(k) + " must be a string");
    out = j_.at(k).get<std::string>();
  }

  void path(const std::string& k, std::filesystem::path& out, const std::filesystem::path& base) const {
    std::string s;
    str(k, s);
    if (s.empty()) return;
    std::filesystem::path p(s);
    out = p.is_absolute() ? p : base / p;
  }

  template <class Parse>
  void parsed(const std::string& k, Parse parse) const {
    if (!has(k)) return;
    std::string s;
    str(k, s);
    try {
      parse(s);
    } catch (const Error& e) {
      throw config_error("config: " + key(k) + ": " + e.what());
    }
  }

  Section child(const std::string& k, std::set<std::string> allowed) const {
    static const json empty = json::object();
    return Section(has(k) ? j_.at(k) : empty, key(k), std::move(allowed));
  }

 private:
  std::string label() const { return path_.empty() ? "the top level" : path_; }

  const json& j_;
  std::string path_;
};

void require(bool ok, const std::string& msg) {
  if (!ok) throw config_error("config: " + msg);
}

}  // namespace

RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("config: not valid JSON: ") + e.what());
  }
  RunConfig c;
  const Section top(j, "", {"seed", "paths", "grid", "simulate", "model", "fit", "predict", "score"});
  top.opt_num("seed", c.seed);

  const Section p = top.child("paths", {"out_dir", "data", "truth", "regions", "fit_state", "report", "predictions",
                                        "scores"});
  c.paths.out_dir = base_dir / c.paths.out_dir;
  p.path("out_dir", c.paths.out_dir, base_dir);
  const auto& out = c.paths.out_dir;
  c.paths.data = out / "data.csv";
  c.paths.truth = out / "truth.csv";
  c.paths.fit_state = out / "fit.bin";
  c.paths.report = out / "fit_report.json";
  c.paths.predictions = out / "predictions.csv";
  c.paths.scores = out / "scores.csv";
  p.path("data", c.paths.data, base_dir);
  p.path("truth", c.paths.truth, base_dir);
  p.path("regions", c.paths.regions, base_dir);
  p.path("fit_state", c.paths.fit_state, base_dir);
  p.path("report", c.paths.report, base_dir);
  p.path("predictions", c.paths.predictions, base_dir);
  p.path("scores", c.paths.scores, base_dir);

  const Section g = top.child("grid", {"bbox", "nx", "ny", "time_bins", "size_param"});
  if (g.has("bbox")) {
    const json& b = g.at("bbox");
    require(b.is_array() && b.size() == 4 && std::all_of(b.begin(), b.end(), [](const json& v) { return v.is_number(); }),
            "grid.bbox must be [xmin, ymin, xmax, ymax]");
    c.grid.bbox = Rect{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
  }
  g.num("nx", c.grid.nx);
  g.num("ny", c.grid.ny);
  g.num("time_bins", c.grid.time_bins);
  g.opt_num("size_param", c.grid.size_param);
  require(c.grid.nx >= 1 && c.grid.ny >= 1, "grid.nx and grid.ny must be >= 1");
  require(c.grid.time_bins >= 1, "grid.time_bins must be >= 1");
  require(!c.grid.size_param || *c.grid.size_param >= 0.0, "grid.size_param must be >= 0");

  const Section s = top.child("simulate", {"scenario", "m", "block", "noise_sd", "fine_scale_sd", "holdout_time"});
  s.str("scenario", c.simulate.scenario);
  s.num("m", c.simulate.m);
  s.num("block", c.simulate.block);
  s.num("noise_sd", c.simulate.noise_sd);
  s.num("fine_scale_sd", c.simulate.fine_scale_sd);
  s.opt_num("holdout_time", c.simulate.holdout_time);
  require(c.simulate.m >= 1, "simulate.m must be >= 1");
  require(c.simulate.block >= 1, "simulate.block must be >= 1");
  require(c.simulate.noise_sd > 0.0, "simulate.noise_sd must be > 0");
  require(c.simulate.fine_scale_sd >= 0.0, "simulate.fine_scale_sd must be >= 0");

  const Section m = top.child("model", {"family", "link", "prior", "n_res", "temporal_basis", "taper_multiplier",
                                        "fs_by_spatial_bau", "fine_scale", "known_sigma2fs", "known_psi",
                                        "aggregation"});
  m.parsed("family", [&](const std::string& v) { c.model.family = parse_family(v); });
  m.parsed("link", [&](const std::string& v) { c.model.link = parse_link(v); });
  m.parsed("prior", [&](const std::string& v) { c.model.prior = parse_prior_type(v); });
  m.num("n_res", c.model.n_res);
  m.num("temporal_basis", c.model.temporal_basis);
  m.num("taper_multiplier", c.model.taper_multiplier);
  m.flag("fs_by_spatial_bau", c.model.fs_by_spatial_bau);
  m.flag("fine_scale", c.model.fine_scale);
  m.opt_num("known_sigma2fs", c.model.known_sigma2fs);
  m.opt_num("known_psi", c.model.known_psi);
  m.str("aggregation", c.model.aggregation);
  require(c.model.n_res >= 1, "model.n_res must be >= 1");
  require(c.model.temporal_basis >= 0, "model.temporal_basis must be >= 0");
  require(c.model.taper_multiplier > 0.0, "model.taper_multiplier must be > 0");
  require(c.model.aggregation == "average" || c.model.aggregation == "sum",
          "model.aggregation must be \"average\" or \"sum\"");

  const Section f = top.child("fit", {"max_iter", "obj_tol", "grad_tol"});
  f.num("max_iter", c.fit.max_iter);
  f.num("obj_tol", c.fit.obj_tol);
  f.num("grad_tol", c.fit.grad_tol);
  require(c.fit.max_iter >= 0, "fit.max_iter must be >= 0");
  require(c.fit.obj_tol > 0.0 && c.fit.grad_tol > 0.0, "fit tolerances must be > 0");

  const Section pr = top.child("predict", {"n_mc", "percentiles", "plots", "sample_target"});
  pr.num("n_mc", c.predict.n_mc);
  if (pr.has("percentiles")) {
    const json& v = pr.at("percentiles");
    require(v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); }),
            "predict.percentiles must be a list of numbers");
    c.predict.percentiles = v.get<std::vector<double>>();
    for (double q : c.predict.percentiles) require(q >= 0.0 && q <= 100.0, "predict.percentiles must lie in [0, 100]");
  }
  pr.flag("plots", c.predict.plots);
  pr.str("sample_target", c.predict.sample_target);
  require(c.predict.n_mc >= 2, "predict.n_mc must be >= 2");
  const std::set<std::string> targets{"", "Y", "mu", "pi", "Z"};
  require(targets.count(c.predict.sample_target), "predict.sample_target must be one of Y, mu, pi, Z or empty");

  const Section sc = top.child("score", {"target", "subset", "alpha", "wall_time", "label", "append"});
  sc.str("target", c.score.target);
  sc.str("subset", c.score.subset);
  sc.num("alpha", c.score.alpha);
  sc.flag("wall_time", c.score.wall_time);
  sc.str("label", c.score.label);
  sc.flag("append", c.score.append);
  require(targets.count(c.score.target) && !c.score.target.empty(), "score.target must be one of Y, mu, pi, Z");
  require(c.score.subset == "unobserved" || c.score.subset == "all", "score.subset must be \"unobserved\" or \"all\"");
  require(c.score.alpha > 0.0 && c.score.alpha < 1.0, "score.alpha must lie in (0, 1)");
  return c;
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw config_error("config " + path.string() + ": not valid JSON: " + e.what());
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw config_error("override '" + o + "' must look like key.path=value");
    const std::string key = o.substr(0, eq);
    const std::string text = o.substr(eq + 1);
    json value;
    try {
      value = json::parse(text);
    } catch (const json::parse_error&) {
      value = text;  // bare strings need no quotes
    }
    json* node = &j;
    std::stringstream ks(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ks, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      if (!node->contains(parts[i])) (*node)[parts[i]] = json::object();
      node = &(*node)[parts[i]];
      if (!node->is_object()) throw config_error("override '" + o + "': " + parts[i] + " is not a section");
    }
    (*node)[parts.back()] = value;
  }
  const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return parse_config(j.dump(), base);
}

}  // namespace frk::app
