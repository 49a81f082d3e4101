// Serial reference kernels against their OpenMP counterparts.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "frk/basis.hpp"
#include "frk/geometry.hpp"
#include "frk/kernels.hpp"

using namespace frk;

namespace {

std::vector<Point> centroids(int side) {
  const BauGrid g = build_bau_grid({0, 0, 1, 1}, side, side, 1);
  std::vector<Point> pts;
  for (int i = 0; i < g.size(); ++i) pts.push_back(g.centroid(i));
  return pts;
}

Eigen::MatrixXd samples(Eigen::Index rows, Eigen::Index cols) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = nd(rng);
  }
  return m;
}

template <bool Parallel>
void bisquare(benchmark::State& st) {
  const BasisSet b = auto_basis({0, 0, 1, 1}, 3);
  const auto pts = centroids(static_cast<int>(st.range(0)));
  for (auto _ : st) {
    SpMat s = Parallel ? kernels::omp::bisquare_design(b.functions, pts) : kernels::serial::bisquare_design(b.functions, pts);
    benchmark::DoNotOptimize(s.nonZeros());
  }
}

const std::vector<double> kPercentiles = {5, 50, 95};

template <bool Parallel>
void summarize(benchmark::State& st) {
  const Eigen::MatrixXd s = samples(st.range(0), 400);
  for (auto _ : st) {
    kernels::Summary out =
        Parallel ? kernels::omp::summarize_rows(s, kPercentiles) : kernels::serial::summarize_rows(s, kPercentiles);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void crps(benchmark::State& st) {
  const Eigen::MatrixXd s = samples(st.range(0), 400);
  const Eigen::VectorXd y = Eigen::VectorXd::Zero(st.range(0));
  for (auto _ : st) {
    Eigen::VectorXd out = Parallel ? kernels::omp::crps_rows(y, s) : kernels::serial::crps_rows(y, s);
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(bisquare<false>)->Name("bisquare_design/serial")->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(bisquare<true>)->Name("bisquare_design/omp")->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(summarize<false>)->Name("summarize_rows/serial")->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK(summarize<true>)->Name("summarize_rows/omp")->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK(crps<false>)->Name("crps_rows/serial")->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK(crps<true>)->Name("crps_rows/omp")->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
