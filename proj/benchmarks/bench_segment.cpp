#include <benchmark/benchmark.h>

#include <random>

#include "tender/pipeline/synthetic.hpp"
#include "tender/segmenter.hpp"

using namespace tender;

namespace {

void BM_ConnectedComponents(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  std::mt19937 gen(1);
  std::bernoulli_distribution on(0.4);
  image::BinaryImage img(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) img.set(x, y, on(gen));
  for (auto _ : state) benchmark::DoNotOptimize(seg::connected_components(img, 8));
  state.SetItemsProcessed(state.iterations() * size * size);
}
BENCHMARK(BM_ConnectedComponents)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_SegmentPage(benchmark::State& state) {
  pipeline::CorpusSpec spec;
  spec.page_width = static_cast<int>(state.range(0));
  spec.page_height = spec.page_width * 4 / 3;
  spec.max_frame_w = spec.page_width / 3;
  spec.max_frame_h = spec.page_height / 4;
  const auto corpus = pipeline::generate_synthetic_corpus(1, spec, 7);
  const seg::SegmentationParams params;
  for (auto _ : state) benchmark::DoNotOptimize(seg::segment_page(corpus.pages[0], params));
}
BENCHMARK(BM_SegmentPage)->Arg(600)->Arg(1200)->Unit(benchmark::kMillisecond);

}  // namespace
