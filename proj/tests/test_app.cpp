#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "frk/app/pipeline.hpp"

using namespace frk;
using namespace frk::app;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("frk_app_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Small Poisson point scenario that fits in well under a second.
json small_poisson(const fs::path& dir) {
  return {{"seed", 3},
          {"paths", {{"out_dir", dir.string()}}},
          {"grid", {{"bbox", {0, 0, 1, 1}}, {"nx", 12}, {"ny", 12}}},
          {"simulate", {{"scenario", "poisson_point"}, {"m", 80}}},
          {"model", {{"family", "poisson"}, {"link", "log"}, {"n_res", 1}}},
          {"predict", {{"n_mc", 50}, {"plots", false}, {"sample_target", "mu"}}},
          {"score", {{"wall_time", false}, {"subset", "all"}}}};
}

RunConfig cfg_of(const json& j) { return parse_config(j.dump()); }

std::string slurp(const fs::path& p) { return read_file(p); }

}  // namespace

TEST_CASE("config parsing is strict about keys and types") {
  const fs::path d = fresh_dir("cfg");
  json j = small_poisson(d);
  CHECK_NOTHROW(cfg_of(j));

  json bad_key = j;
  bad_key["model"]["n_resolutions"] = 2;
  CHECK(fixture::thrown_kind([&] { cfg_of(bad_key); }) == ErrorKind::config);

  json bad_type = j;
  bad_type["model"]["n_res"] = "two";
  CHECK(fixture::thrown_kind([&] { cfg_of(bad_type); }) == ErrorKind::config);

  json bad_top = j;
  bad_top["extra"] = 1;
  CHECK(fixture::thrown_kind([&] { cfg_of(bad_top); }) == ErrorKind::config);

  const fs::path file = d / "run.json";
  std::ofstream(file) << j.dump();
  const RunConfig c = load_config(file, {"model.n_res=3", "predict.percentiles=[10,50,90]"});
  CHECK(c.model.n_res == 3);
  CHECK(c.predict.percentiles == std::vector<double>{10, 50, 90});
  CHECK(fixture::thrown_kind([&] { load_config(file, {"model.n_res"}); }) == ErrorKind::config);
}

TEST_CASE("data rows survive a CSV round trip") {
  const fs::path d = fresh_dir("csv");
  std::vector<DataRow> rows(3);
  rows[0].geom = {Point{0.25, 0.75}, {}};
  rows[0].z = 4;
  rows[1].geom = {Rect{0.1, 0.2, 0.4, 0.5}, 2};
  rows[1].z = 17;
  rows[1].k = 150;
  rows[2].geom = {BauList{{1, 5, 9}}, {}};
  rows[2].z = 0.125;
  write_atomic(d / "data.csv", format_data(rows));
  const auto back = read_data(d / "data.csv");
  REQUIRE(back.size() == 3);
  CHECK(std::get<Point>(back[0].geom.shape).x == 0.25);
  CHECK(!back[0].k);
  CHECK(std::get<Rect>(back[1].geom.shape).ymax == 0.5);
  CHECK(back[1].geom.time == 2);
  CHECK(*back[1].k == 150);
  CHECK(std::get<BauList>(back[2].geom.shape).ids == std::vector<int>{1, 5, 9});
  CHECK(back[2].z == 0.125);
  CHECK(format_data(back) == format_data(rows));

  std::ofstream(d / "bad.csv") << "x,y,z\n0.1,0.2\n";
  CHECK(fixture::thrown_kind([&] { read_data(d / "bad.csv"); }) == ErrorKind::io);
  std::ofstream(d / "unknown.csv") << "x,y,z,w\n0.1,0.2,1,3\n";
  CHECK(fixture::thrown_kind([&] { read_data(d / "unknown.csv"); }) == ErrorKind::io);
}

TEST_CASE("simulated scenarios have the documented shape") {
  const fs::path d = fresh_dir("sim");
  json j = small_poisson(d);
  j["grid"]["nx"] = 64;
  j["grid"]["ny"] = 64;
  j["simulate"]["m"] = 750;
  const Simulation p = simulate(cfg_of(j));
  CHECK(p.data.size() == 750);
  CHECK(p.truth.size() == 4096);

  json nb = j;
  nb["grid"] = {{"bbox", {0, 0, 1, 1}}, {"nx", 30}, {"ny", 30}, {"size_param", 50}};
  nb["simulate"] = {{"scenario", "negbin_areal"}};
  nb["model"] = {{"family", "negative-binomial"}, {"link", "logit"}, {"aggregation", "sum"}};
  const Simulation n = simulate(cfg_of(nb));
  CHECK(n.truth.size() == 900);
  CHECK(std::all_of(n.truth.begin(), n.truth.end(), [](const TruthRow& t) { return t.k && *t.k == 50.0; }));
  CHECK(std::all_of(n.data.begin(), n.data.end(), [](const DataRow& r) { return r.k && *r.k >= 50.0; }));

  json none = j;
  none.erase("seed");
  CHECK(fixture::thrown_kind([&] { simulate(cfg_of(none)); }) == ErrorKind::config);
}

TEST_CASE("fit state reloads to the same log-likelihood") {
  const fs::path d = fresh_dir("reload");
  const RunConfig cfg = cfg_of(small_poisson(d));
  cmd_simulate(cfg);
  cmd_fit(cfg);
  const FitState st = decode_fit_state(slurp(cfg.paths.fit_state));
  CHECK(encode_fit_state(st) == slurp(cfg.paths.fit_state));
  const ModelStructures s = make_structures(cfg, read_data(cfg.paths.data));
  const LaplaceResult lr = reload_laplace(s, st);
  CHECK(lr.loglik == doctest::Approx(st.loglik).epsilon(1e-10));

  const json report = json::parse(slurp(cfg.paths.report));
  CHECK(report["family"] == "poisson");
  CHECK(report["n_obs"] == 80);

  std::string bytes = slurp(cfg.paths.fit_state);
  bytes[0] = 'X';
  CHECK(fixture::thrown_kind([&] { decode_fit_state(bytes); }) == ErrorKind::io);
  CHECK(fixture::thrown_kind([&] { decode_fit_state(slurp(cfg.paths.fit_state).substr(0, 40)); }) == ErrorKind::io);

  // a state from a different model specification is refused
  json other = small_poisson(d);
  other["model"]["n_res"] = 2;
  const RunConfig c2 = cfg_of(other);
  const ModelStructures s2 = make_structures(c2, read_data(c2.paths.data));
  CHECK(fixture::thrown_kind([&] { reload_laplace(s2, st); }) == ErrorKind::state);
}

TEST_CASE("prediction regions and percentile columns") {
  const fs::path d = fresh_dir("regions");
  json j = small_poisson(d);
  j["paths"]["regions"] = (d / "regions.csv").string();
  j["predict"]["percentiles"] = {10, 50, 90};
  j["predict"]["sample_target"] = "";
  const RunConfig cfg = cfg_of(j);
  cmd_simulate(cfg);
  cmd_fit(cfg);
  std::ofstream(d / "regions.csv") << "id,xmin,ymin,xmax,ymax\n"
                                   << "1,0,0,0.5,0.5\n2,0.5,0,1,0.5\n3,0,0.5,0.5,1\n4,0.5,0.5,1,1\n5,0.2,0.2,0.8,0.8\n";
  cmd_predict(cfg);
  const Table t = read_csv(cfg.paths.predictions);
  CHECK(t.header == std::vector<std::string>{"id", "target", "mean", "sd", "p10", "p50", "p90"});
  int mu_rows = 0;
  for (const auto& r : t.rows) mu_rows += r[1] == "mu";
  CHECK(mu_rows == 5);
}

TEST_CASE("scores ignore row order and vanish for a perfect prediction") {
  const fs::path d = fresh_dir("scores");
  json j = small_poisson(d);
  const RunConfig cfg = cfg_of(j);
  cmd_simulate(cfg);
  cmd_fit(cfg);
  cmd_predict(cfg);
  const Scores a = score_files(cfg);

  auto truth = read_truth(cfg.paths.truth);
  std::mt19937_64 rng(5);
  std::shuffle(truth.begin(), truth.end(), rng);
  write_atomic(cfg.paths.truth, format_truth(truth));
  const Scores b = score_files(cfg);
  CHECK(format_scores(a, cfg, true) == format_scores(b, cfg, true));
  CHECK(a.n == 144);
  REQUIRE(a.crps);

  std::ostringstream os;
  os << "id,target,mean,sd,p5,p95\n";
  for (const auto& t : truth) os << t.id << ",mu," << fmt(t.mu) << ",0," << fmt(t.mu) << ',' << fmt(t.mu) << '\n';
  write_atomic(cfg.paths.predictions, os.str());
  fs::remove(d / "samples_mu.bin");
  const Scores p = score_files(cfg);
  CHECK(p.rmspe == 0.0);
  CHECK(p.mae == 0.0);
  CHECK(p.is == 0.0);
  CHECK(p.cvg == 1.0);
  CHECK(!p.crps);

  // a truth id without a prediction is an error
  truth.push_back(truth.front());
  truth.back().id = 100000;
  write_atomic(cfg.paths.truth, format_truth(truth));
  CHECK(fixture::thrown_kind([&] { score_files(cfg); }) == ErrorKind::config);
}

TEST_CASE("forbidden family and link pairs fail with the configuration exit code") {
  const fs::path d = fresh_dir("forbidden");
  json j = small_poisson(d);
  cmd_simulate(cfg_of(j));
  j["model"]["family"] = "gaussian";
  j["model"]["link"] = "logit";
  const auto kind = fixture::thrown_kind([&] { cmd_fit(cfg_of(j)); });
  REQUIRE(kind);
  CHECK(exit_code(*kind) == 2);
}

TEST_CASE("heatmaps have one pixel block per BAU and time slices side by side") {
  BauGrid g(Rect{0, 0, 1, 1}, 4, 3, 2);
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(g.size(), 0.0, 1.0);
  v[3] = std::nan("");
  const std::string img = render_ppm(g, v, 5);
  std::istringstream is(img);
  std::string magic;
  int w = 0, h = 0, maxv = 0;
  is >> magic >> w >> h >> maxv;
  CHECK(magic == "P6");
  CHECK(h == 15);
  CHECK(w > 2 * 20);
  is.get();
  const auto header = static_cast<std::size_t>(is.tellg());
  CHECK(img.size() == header + static_cast<std::size_t>(3 * w * h));
}
