#include <benchmark/benchmark.h>

#include "foldaug/detector.hpp"
#include "foldaug/random.hpp"
#include "foldaug/rsgaia.hpp"
#include "foldaug/synthgen.hpp"
#include "foldaug_cli/workflow.hpp"

using namespace foldaug;

namespace {

const GrayImage& sample_image() {
  static const GrayImage img = synthgen::render_image({}, 0).image;
  return img;
}

const detector::Model& small_model() {
  static const auto model = [] {
    synthgen::CorpusSpec spec;
    spec.width = 160;
    spec.height = 160;
    spec.patients = 3;
    spec.images_per_patient = 2;
    spec.validation_patients = 0;
    static const cli::Corpus corpus = cli::corpus_from_generated(synthgen::generate_images(spec));
    const auto splits = cli::make_splits(corpus);
    return detector::SlidingWindowTrainer{}.train(splits.positives, {}, RngSeed{1});
  }();
  return *model;
}

void BM_EdgeStrength(benchmark::State& state) {
  const rsgaia::AugmentConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(rsgaia::edge_strength(sample_image(), cfg));
}
BENCHMARK(BM_EdgeStrength)->Unit(benchmark::kMillisecond);

void BM_Augment(benchmark::State& state) {
  const rsgaia::AugmentConfig cfg;
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(rsgaia::augment(sample_image(), cfg, RngSeed{++i}));
}
BENCHMARK(BM_Augment)->Unit(benchmark::kMillisecond);

void BM_Infer(benchmark::State& state) {
  const auto& model = small_model();
  for (auto _ : state) benchmark::DoNotOptimize(model.infer(sample_image(), 0.0));
}
BENCHMARK(BM_Infer)->Unit(benchmark::kMillisecond);

void BM_Nms(benchmark::State& state) {
  Rng rng(RngSeed{2});
  std::vector<Detection> dets(static_cast<std::size_t>(state.range(0)));
  for (auto& d : dets) {
    const int x = rng.uniform_int(0, 440), y = rng.uniform_int(0, 440), s = rng.uniform_int(40, 70);
    d = {{x, y, x + s, y + s}, ClassLabel::lesion, rng.uniform()};
  }
  for (auto _ : state) benchmark::DoNotOptimize(detector::nms(dets, 0.5));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Nms)->Arg(100)->Arg(1000);

}  // namespace
BENCHMARK_MAIN();
