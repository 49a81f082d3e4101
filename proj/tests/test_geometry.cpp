#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <functional>
#include <random>

#include "frk/error.hpp"
#include "frk/geometry.hpp"
#include "oracles.hpp"

using namespace frk;

namespace {

// 3 columns x 4 rows of unit cells; A_1 is the top-left cell.
BauGrid figure_grid() { return build_bau_grid({0, 0, 3, 4}, 3, 4, 1); }

std::vector<Support> figure_supports() {
  return {
      {Rect{0.25, 2.25, 0.9, 3.25}, std::nullopt},  // A_1 and A_4
      {Point{2.75, 2.75}, std::nullopt},             // A_6
      {Rect{0.15, 0.15, 1.85, 0.9}, std::nullopt},   // A_10 and A_11
  };
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::state;
}

}  // namespace

TEST_CASE("regular grid tiling and ordering") {
  const BauGrid g = build_bau_grid({0, 0, 1, 1}, 10, 10, 1);
  CHECK(g.size() == 100);
  double total = 0.0;
  for (int i = 0; i < g.n_spatial(); ++i) {
    CHECK(g.cell(i).area() == doctest::Approx(0.01).epsilon(1e-12));
    total += g.cell(i).area();
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.rel_weights().size() == 100);
  CHECK(g.fs_scale().minCoeff() == 1.0);

  const BauGrid st = build_bau_grid({0, 0, 1, 1}, 2, 2, 3);
  CHECK(st.size() == 12);
  // 1-based BAU 5 is 0-based 4: spatial cell 1 (0-based 0) at time 2 (0-based 1).
  CHECK(st.spatial_of(4) == 0);
  CHECK(st.time_of(4) == 1);
  CHECK(st.index(0, 1) == 4);
}

TEST_CASE("cells do not overlap and tile the bbox") {
  const BauGrid g = build_bau_grid({-1, 2, 4, 5}, 7, 3, 1);
  for (int a = 0; a < g.n_spatial(); ++a) {
    for (int b = a + 1; b < g.n_spatial(); ++b) {
      const Rect& p = g.cell(a);
      const Rect& q = g.cell(b);
      const double ox = std::min(p.xmax, q.xmax) - std::max(p.xmin, q.xmin);
      const double oy = std::min(p.ymax, q.ymax) - std::max(p.ymin, q.ymin);
      CHECK_FALSE((ox > 1e-12 && oy > 1e-12));
    }
  }
  CHECK(g.cell(0).xmin == -1.0);
  CHECK(g.cell(0).ymax == 5.0);
  CHECK(g.cell(g.n_spatial() - 1).xmax == doctest::Approx(4.0));
  CHECK(g.cell(g.n_spatial() - 1).ymin == doctest::Approx(2.0));
}

TEST_CASE("degenerate grids are rejected") {
  CHECK(kind_of([] { build_bau_grid({0, 0, 0, 1}, 2, 2, 1); }) == ErrorKind::geometry);
  CHECK(kind_of([] { build_bau_grid({0, 0, 1, 1}, 0, 2, 1); }) == ErrorKind::config);
  BauGrid g = build_bau_grid({0, 0, 1, 1}, 2, 2, 1);
  CHECK(kind_of([&] { g.set_rel_weights(Eigen::VectorXd::Constant(4, 0.0)); }) == ErrorKind::domain);
  CHECK(kind_of([&] { g.set_fs_scale(Eigen::VectorXd::Constant(3, 1.0)); }) == ErrorKind::config);
}

TEST_CASE("figure configuration c-sets") {
  const BauGrid g = figure_grid();
  const auto sup = figure_supports();
  const SupportSet s = map_supports(g, sup);
  REQUIRE(s.size() == 3);
  CHECK(s.bau_index_sets[0] == std::vector<int>{0, 3});
  CHECK(s.bau_index_sets[1] == std::vector<int>{5});
  CHECK(s.bau_index_sets[2] == std::vector<int>{9, 10});
}

TEST_CASE("closed-set semantics") {
  const BauGrid g = figure_grid();
  const std::vector<Support> edge{{Point{1.0, 3.5}, std::nullopt}};
  CHECK(map_supports(g, edge).bau_index_sets[0] == std::vector<int>{0, 1});
  const std::vector<Support> corner{{Point{1.0, 3.0}, std::nullopt}};
  CHECK(map_supports(g, corner).bau_index_sets[0] == std::vector<int>{0, 1, 3, 4});
  const std::vector<Support> whole{{Rect{0, 0, 3, 4}, std::nullopt}};
  const auto all = map_supports(g, whole).bau_index_sets[0];
  CHECK(all.size() == 12);
  CHECK(all.front() == 0);
  CHECK(all.back() == 11);
}

TEST_CASE("disjoint support names the offending index") {
  const BauGrid g = figure_grid();
  const std::vector<Support> sup{{Point{1, 1}, std::nullopt}, {Rect{5, 5, 6, 6}, std::nullopt}};
  try {
    map_supports(g, sup);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::geometry);
    CHECK(std::string(e.what()).find(" 1") != std::string::npos);
  }
  const std::vector<Support> bad_list{{BauList{{0, 99}}, std::nullopt}};
  CHECK_THROWS_AS(map_supports(g, bad_list), Error);
}

TEST_CASE("space-time supports") {
  const BauGrid g = build_bau_grid({0, 0, 2, 2}, 2, 2, 3);
  const std::vector<Support> sup{{Point{0.5, 0.5}, 1}, {Point{0.5, 0.5}, std::nullopt}};
  const SupportSet s = map_supports(g, sup);
  CHECK(s.bau_index_sets[0] == std::vector<int>{6});
  CHECK(s.bau_index_sets[1] == std::vector<int>{2, 6, 10});
  const std::vector<Support> bad{{Point{0.5, 0.5}, 3}};
  CHECK_THROWS_AS(map_supports(g, bad), Error);
}

TEST_CASE("incidence weights") {
  const BauGrid g = figure_grid();
  const auto sup = figure_supports();
  const SupportSet s = map_supports(g, sup);
  const Eigen::MatrixXd c = Eigen::MatrixXd(build_incidence(g, s, true, false).weights);
  CHECK(c(0, 0) == 0.5);
  CHECK(c(0, 3) == 0.5);
  CHECK(c.row(0).sum() == 1.0);
  const Eigen::MatrixXd u = Eigen::MatrixXd(build_incidence(g, s, true, true).weights);
  CHECK(u(2, 9) == 1.0);
  CHECK(u(2, 10) == 1.0);
  CHECK(u.row(2).sum() == 2.0);

  // v_i = |A_i| on cells of unequal area gives w_ij = |A_i| / |B_j|.
  BauGrid h = figure_grid();
  Eigen::VectorXd area(12);
  for (int i = 0; i < 12; ++i) area[i] = 0.5 + 0.25 * i;
  h.set_rel_weights(area);
  const Eigen::MatrixXd w = Eigen::MatrixXd(build_incidence(h, map_supports(h, sup), true, false).weights);
  CHECK(w(0, 0) == doctest::Approx(0.5 / (0.5 + 1.25)).epsilon(1e-15));
  CHECK(w(0, 3) == doctest::Approx(1.25 / (0.5 + 1.25)).epsilon(1e-15));
  CHECK(w(2, 9) == doctest::Approx(2.75 / (2.75 + 3.0)).epsilon(1e-15));

  const Eigen::MatrixXd sum = Eigen::MatrixXd(build_incidence(h, map_supports(h, sup), false, false).weights);
  CHECK(sum(0, 3) == 1.25);
}

TEST_CASE("random grids against brute force") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> dim(1, 6);
  for (int rep = 0; rep < 100; ++rep) {
    const Rect box{-1.0 + unif(rng), unif(rng), 1.0 + 2.0 * unif(rng), 2.0 + unif(rng)};
    const int nt = rep % 4 == 0 ? 2 : 1;
    BauGrid g = build_bau_grid(box, dim(rng), dim(rng), nt);
    Eigen::VectorXd v(g.size());
    for (int i = 0; i < g.size(); ++i) v[i] = 0.1 + unif(rng);
    g.set_rel_weights(v);
    std::vector<Support> sup;
    const int m = 1 + rep % 7;
    for (int j = 0; j < m; ++j) {
      const double x0 = box.xmin + unif(rng) * box.width();
      const double y0 = box.ymin + unif(rng) * box.height();
      std::optional<int> t;
      if (nt > 1 && j % 2 == 0) t = j % nt;
      if (j % 3 == 0) {
        sup.push_back({Point{x0, y0}, t});
      } else {
        sup.push_back({Rect{x0, y0, x0 + unif(rng) * box.width(), y0 + unif(rng) * box.height()}, t});
      }
    }
    const SupportSet s = map_supports(g, sup);
    for (int j = 0; j < m; ++j) CHECK(s.bau_index_sets[j] == oracle::brute_support(g, sup[j]));
    for (const bool unit : {false, true}) {
      for (const bool norm : {false, true}) {
        const IncidenceMatrix inc = build_incidence(g, s, norm, unit);
        const Eigen::MatrixXd dense = Eigen::MatrixXd(inc.weights);
        CHECK((dense - oracle::brute_incidence(g, s.bau_index_sets, norm, unit)).cwiseAbs().maxCoeff() == 0.0);
        for (int j = 0; j < m; ++j) {
          std::vector<int> nz;
          for (SpMatRow::InnerIterator it(inc.weights, j); it; ++it) nz.push_back(static_cast<int>(it.col()));
          CHECK(nz == s.bau_index_sets[j]);
        }
        if (norm && !unit) {
          const Eigen::VectorXd ones = inc.weights * Eigen::VectorXd::Ones(g.size());
          CHECK((ones.array() - 1.0).abs().maxCoeff() <= 1e-12);
        }
        if (unit) CHECK(dense.maxCoeff() == 1.0);
      }
    }
  }
}
