// Parallel kernels against their serial references on synthetic inputs.
#include <benchmark/benchmark.h>

#include "fieldfuse/aggregation.hpp"
#include "fieldfuse/features.hpp"
#include "fieldfuse/knn.hpp"
#include "fieldfuse/reference.hpp"
#include "fieldfuse/synthgen.hpp"

using namespace fieldfuse;

namespace {

const SynthScene& scene() {
  static const SynthScene s = [] {
    SynthSpec spec;
    spec.seed = 7;
    spec.native_resolutions = true;
    return generate(spec);
  }();
  return s;
}

const BandRaster& coarse_band() {
  return scene().scene.band("B05");
}

KnnModel knn_model(std::size_t n_train) {
  Rng rng = make_rng(3, "bench");
  PixelDataset d;
  d.class_catalog = {"a", "b", "c", "d"};
  std::vector<double> x(kFeatureCount);
  for (std::size_t i = 0; i < n_train; ++i) {
    for (auto& v : x) v = standard_normal(rng);
    d.push_row(x, static_cast<int>(i % 4), -1, -1, -1);
  }
  return knn_fit(d, 8);
}

std::vector<double> queries(std::size_t n) {
  Rng rng = make_rng(4, "bench");
  std::vector<double> q(n * kFeatureCount);
  for (auto& v : q) v = standard_normal(rng);
  return q;
}

ProbabilityTable table(std::size_t fields, std::size_t pixels_per_field, int n_classes) {
  Rng rng = make_rng(5, "bench");
  ProbabilityTable t;
  t.n_classes = n_classes;
  for (std::size_t f = 0; f < fields; ++f) {
    t.field_ids.push_back("F" + std::to_string(f));
    for (std::size_t p = 0; p < pixels_per_field; ++p) {
      t.field_slot.push_back(static_cast<std::int32_t>(f));
      t.rows.push_back(static_cast<int>(p));
      t.cols.push_back(static_cast<int>(f));
      double sum = 0.0;
      const std::size_t base = t.probs.size();
      for (int k = 0; k < n_classes; ++k) {
        t.probs.push_back(uniform_unit(rng) + 1e-3);
        sum += t.probs.back();
      }
      for (int k = 0; k < n_classes; ++k) t.probs[base + k] /= sum;
    }
  }
  return t;
}

void BM_Upsample(benchmark::State& state) {
  const auto& band = coarse_band();
  for (auto _ : state) benchmark::DoNotOptimize(upsample_bilinear(band));
}
BENCHMARK(BM_Upsample)->Unit(benchmark::kMillisecond);

void BM_UpsampleReference(benchmark::State& state) {
  const auto& band = coarse_band();
  for (auto _ : state) benchmark::DoNotOptimize(reference::upsample_bilinear(band));
}
BENCHMARK(BM_UpsampleReference)->Unit(benchmark::kMillisecond);

void BM_Rasterize(benchmark::State& state) {
  const auto grid = target_grid(scene().scene);
  for (auto _ : state) benchmark::DoNotOptimize(rasterize_fields(scene().fields, grid));
}
BENCHMARK(BM_Rasterize)->Unit(benchmark::kMillisecond);

void BM_RasterizeReference(benchmark::State& state) {
  const auto grid = target_grid(scene().scene);
  for (auto _ : state) benchmark::DoNotOptimize(reference::rasterize_fields(scene().fields, grid));
}
BENCHMARK(BM_RasterizeReference)->Unit(benchmark::kMillisecond);

void BM_KnnPredict(benchmark::State& state) {
  const auto model = knn_model(static_cast<std::size_t>(state.range(0)));
  const auto q = queries(512);
  for (auto _ : state) benchmark::DoNotOptimize(knn_predict_batch(model, q));
}
BENCHMARK(BM_KnnPredict)->Arg(4096)->Arg(16384)->Unit(benchmark::kMillisecond);

void BM_KnnPredictReference(benchmark::State& state) {
  const auto model = knn_model(static_cast<std::size_t>(state.range(0)));
  const auto q = queries(512);
  for (auto _ : state) benchmark::DoNotOptimize(reference::knn_predict_batch(model, q));
}
BENCHMARK(BM_KnnPredictReference)->Arg(4096)->Arg(16384)->Unit(benchmark::kMillisecond);

void BM_AggregateBayesian(benchmark::State& state) {
  const auto t = table(2000, 64, 7);
  for (auto _ : state) benchmark::DoNotOptimize(aggregate_table(t, Strategy::Bayesian, 0.35));
}
BENCHMARK(BM_AggregateBayesian)->Unit(benchmark::kMillisecond);

void BM_AggregateBayesianReference(benchmark::State& state) {
  const auto t = table(2000, 64, 7);
  for (auto _ : state) benchmark::DoNotOptimize(reference::aggregate_table(t, Strategy::Bayesian, 0.35));
}
BENCHMARK(BM_AggregateBayesianReference)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
