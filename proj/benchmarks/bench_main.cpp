#include <map>

#include <benchmark/benchmark.h>

#include "tloss/metrics.hpp"
#include "tloss/predictor.hpp"
#include "tloss/synthetic.hpp"
#include "tloss/tdist_loss.hpp"

namespace tloss {
namespace {

struct Fixture {
  BinaryMask gt;
  BinaryMask weak;
  Volume3D intensity;
};

const Fixture& fixture(std::int64_t n) {
  static std::map<std::int64_t, Fixture> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    DatasetSpec spec;
    spec.n = 1;
    spec.shape.dims = {n, n, n};
    const SyntheticSample s = gen_sample(spec, 0);
    it = cache.emplace(n, Fixture{s.gt, s.weak, s.intensity}).first;
  }
  return it->second;
}

ProbabilityMask soft(const BinaryMask& m) {
  ProbabilityMask mu(m.dims());
  for (std::size_t i = 0; i < m.size(); ++i) mu[i] = m[i] ? 0.8 : 0.2;
  return mu;
}

void BM_TLossGrad(benchmark::State& state) {
  const Fixture& f = fixture(state.range(0));
  const ProbabilityMask mu = soft(f.weak);
  const auto mode = state.range(1) ? TLossMode::kMultivariate : TLossMode::kPerVoxel;
  const StudentTParams p = StudentTParams::identity_init(ScaleScope::kPerVoxel, f.gt.dims());
  for (auto _ : state) benchmark::DoNotOptimize(t_loss_grad(f.gt, mu, p, mode));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.gt.size()));
}
BENCHMARK(BM_TLossGrad)->ArgsProduct({{16, 32}, {0, 1}});

void BM_Hd95(benchmark::State& state) {
  const Fixture& f = fixture(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(hd95(f.weak, f.gt));
}
BENCHMARK(BM_Hd95)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_PredictorForwardBackward(benchmark::State& state) {
  const Fixture& f = fixture(state.range(0));
  const FeatureConfig cfg;
  const FeatureField feats = extract_features(f.intensity, cfg);
  Rng rng(1);
  const PredictorParams p = init_params(rng, cfg);
  const std::vector<double> d_mu(feats.voxels(), 1e-3);
  for (auto _ : state) {
    ForwardCache cache;
    benchmark::DoNotOptimize(forward(p, feats, &cache));
    benchmark::DoNotOptimize(backward(p, feats, d_mu, &cache));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(feats.voxels()));
}
BENCHMARK(BM_PredictorForwardBackward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_GaussianSmooth(benchmark::State& state) {
  const Fixture& f = fixture(state.range(0));
  const double sigma = static_cast<double>(state.range(1)) / 10.0;
  for (auto _ : state) benchmark::DoNotOptimize(gaussian_smooth(f.intensity, sigma));
}
BENCHMARK(BM_GaussianSmooth)->ArgsProduct({{32}, {8, 20}})->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace tloss

BENCHMARK_MAIN();
