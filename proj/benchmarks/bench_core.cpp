#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "fedmvc/dataset.hpp"
#include "fedmvc/federation.hpp"
#include "fedmvc/local_solver.hpp"
#include "fedmvc/tensor.hpp"
#include "fedmvc/tucker_solver.hpp"

namespace {

fedmvc::DenseTensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed) {
  fedmvc::DenseTensor t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = normal(rng);
  return t;
}

fedmvc::MultiViewDataset blob_dataset(std::size_t n, std::size_t clusters,
                                      std::vector<std::size_t> dims, std::uint64_t seed) {
  fedmvc::SyntheticSpec spec;
  spec.samples = n;
  spec.clusters = clusters;
  spec.view_dims = std::move(dims);
  spec.separation = 6.0;
  spec.seed = seed;
  return fedmvc::generate_synthetic(spec);
}

struct SweepFixture {
  fedmvc::MultiViewDataset data;
  fedmvc::HeatKernelCoefficients coeffs;
  std::vector<Eigen::MatrixXd> centers;
  Eigen::MatrixXd memberships;
  Eigen::VectorXd view_weights;

  SweepFixture(std::size_t n, std::size_t clusters, std::vector<std::size_t> dims)
      : data(blob_dataset(n, clusters, std::move(dims), 1)) {
    coeffs = fedmvc::compute_coefficients(data.views, fedmvc::HkcEstimator::MinMax);
    std::mt19937_64 rng(1);
    centers = fedmvc::seed_centers(data.views, clusters, rng);
    const auto distances = fedmvc::pairwise_distances(data.views, centers, coeffs);
    view_weights = Eigen::VectorXd::Constant(
        static_cast<Eigen::Index>(data.views.size()), 1.0 / data.views.size());
    memberships = fedmvc::update_memberships(distances, view_weights, 2.0, 2.0);
  }
};

void BM_Matricize(benchmark::State& state) {
  const auto t = random_tensor({64, 48, 8}, 2);
  const auto mode = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fedmvc::matricize(t, mode));
}
BENCHMARK(BM_Matricize)->Arg(0)->Arg(1)->Arg(2);

void BM_ModeProduct(benchmark::State& state) {
  const auto t = random_tensor({64, 48, 8}, 3);
  const auto mode = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(8, static_cast<Eigen::Index>(t.extent(mode)));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(fedmvc::mode_n_product(t, m, mode));
}
BENCHMARK(BM_ModeProduct)->Arg(0)->Arg(1)->Arg(2);

void BM_HosvdInit(benchmark::State& state) {
  const auto t = random_tensor({32, 64, 6}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(fedmvc::hosvd_init(t, {8, 12, 3}));
}
BENCHMARK(BM_HosvdInit);

void BM_PairwiseDistances(benchmark::State& state) {
  const SweepFixture fx(static_cast<std::size_t>(state.range(0)), 8, {32, 16, 8});
  for (auto _ : state)
    benchmark::DoNotOptimize(fedmvc::pairwise_distances(fx.data.views, fx.centers, fx.coeffs));
}
BENCHMARK(BM_PairwiseDistances)->Arg(256)->Arg(1024);

void BM_DenseSweep(benchmark::State& state) {
  const SweepFixture fx(static_cast<std::size_t>(state.range(0)), 8, {32, 16, 8});
  for (auto _ : state) {
    auto distances = fedmvc::pairwise_distances(fx.data.views, fx.centers, fx.coeffs);
    auto memberships = fedmvc::update_memberships(distances, fx.view_weights, 2.0, 2.0);
    auto centers = fedmvc::update_centers(fx.data.views, fx.centers, memberships,
                                          fx.view_weights, fx.coeffs, 2.0, 2.0);
    distances = fedmvc::pairwise_distances(fx.data.views, centers, fx.coeffs);
    benchmark::DoNotOptimize(fedmvc::update_view_weights(distances, memberships, 2.0, 2.0));
  }
}
BENCHMARK(BM_DenseSweep)->Arg(256)->Arg(1024);

void BM_TuckerSweep(benchmark::State& state) {
  const SweepFixture fx(static_cast<std::size_t>(state.range(0)), 8, {32, 16, 8});
  const auto tv = fedmvc::tensorize_views(fx.data);
  fedmvc::TuckerFactors factors;
  {
    fedmvc::DenseTensor stacked({8, tv.padded_dim(), tv.views()});
    std::mt19937_64 rng(6);
    std::normal_distribution<double> normal;
    for (std::size_t i = 0; i < stacked.size(); ++i) stacked[i] = normal(rng);
    factors = fedmvc::hosvd_init(stacked, {8, 8, 2});
  }
  for (auto _ : state) {
    const auto targets = fedmvc::weighted_center_targets(
        tv, fx.memberships, fx.view_weights, fedmvc::tucker_reconstruct(factors), fx.coeffs,
        2.0, 2.0);
    factors.core = fedmvc::update_core(targets, factors);
    factors.feature = fedmvc::update_factor(targets, factors, fedmvc::FactorMode::Feature);
    benchmark::DoNotOptimize(factors);
  }
}
BENCHMARK(BM_TuckerSweep)->Arg(256);

void BM_ComputeStatistics(benchmark::State& state) {
  const auto data = blob_dataset(512, 8, {32, 16, 8}, 7);
  fedmvc::SolverConfig config;
  config.clusters = 8;
  config.max_iters = 5;
  const auto model = fedmvc::fit_local(data, config);
  fedmvc::PrivacyParams privacy;
  privacy.enabled = state.range(0) != 0;
  for (auto _ : state) {
    std::mt19937_64 rng(9);
    benchmark::DoNotOptimize(
        fedmvc::compute_statistics(model, data, config.fuzzifier, privacy, rng));
  }
}
BENCHMARK(BM_ComputeStatistics)->Arg(0)->Arg(1);

void BM_FederationRound(benchmark::State& state) {
  const auto data = blob_dataset(512, 4, {16, 8}, 8);
  fedmvc::PartitionPlan plan;
  plan.clients = 4;
  plan.seed = 8;
  const auto clients = fedmvc::partition_clients(data, plan);
  fedmvc::FederationConfig fed;
  fed.solver.clusters = 4;
  fed.rounds = 1;
  fed.local_epochs = 1;
  fed.seed = 8;
  for (auto _ : state) benchmark::DoNotOptimize(fedmvc::run_federation(clients, fed));
}
BENCHMARK(BM_FederationRound);

}  // namespace

BENCHMARK_MAIN();
