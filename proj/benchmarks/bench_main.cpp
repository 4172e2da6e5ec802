#include <benchmark/benchmark.h>

#include <vector>

#include "duogesture/datagen.hpp"
#include "duogesture/kinalysis.hpp"
#include "duogesture/metrics.hpp"
#include "duogesture/objectives.hpp"
#include "duogesture/rvq.hpp"
#include "duogesture/spectral.hpp"

namespace duogesture {
namespace {

ag::Matrix gaussian(int rows, int cols, Rng& rng) {
  ag::Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int c = 0; c < cols; ++c) m(i, c) = rng.normal();
  }
  return m;
}

std::vector<double> noisy_sine(int n, Rng& rng) {
  std::vector<double> x(n);
  for (int t = 0; t < n; ++t) x[t] = std::sin(2.0 * M_PI * 1.12 * t / 30.0) + 0.1 * rng.normal();
  return x;
}

void BM_ResidualQuantize(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  Rng rng(1);
  std::vector<ag::Matrix> books;
  for (int l = 0; l < 4; ++l) books.push_back(gaussian(K, 32, rng));
  const ag::Matrix latents = gaussian(32, 32, rng);
  for (auto _ : state) benchmark::DoNotOptimize(residual_quantize(books, latents, 4));
}
BENCHMARK(BM_ResidualQuantize)->Arg(32)->Arg(256);

void BM_WelchPsd(benchmark::State& state) {
  Rng rng(2);
  const auto x = noisy_sine(static_cast<int>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(welch_psd(x, 30.0));
}
BENCHMARK(BM_WelchPsd)->Arg(64)->Arg(450);

void BM_Plv(benchmark::State& state) {
  Rng rng(3);
  const auto a = noisy_sine(static_cast<int>(state.range(0)), rng);
  const auto b = noisy_sine(static_cast<int>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(plv(a, b, 30.0));
}
BENCHMARK(BM_Plv)->Arg(64)->Arg(450);

void BM_Frechet(benchmark::State& state) {
  Rng rng(4);
  const int d = static_cast<int>(state.range(0));
  const Eigen::MatrixXd a = gaussian(400, d, rng);
  const Eigen::MatrixXd b = gaussian(400, d, rng);
  for (auto _ : state) benchmark::DoNotOptimize(frechet(a, b));
}
BENCHMARK(BM_Frechet)->Arg(32)->Arg(128);

/// Desk model over codecs pretrained for a few steps on eight synthetic clips.
struct DeskFixture {
  ModelConfig cfg = [] {
    ModelConfig c = ModelConfig::desk();
    c.codec_steps = 10;
    return c;
  }();
  std::vector<Clip> clips = [this] {
    SynthSpec spec = SynthSpec::matching(cfg);
    spec.n_clips = 8;
    return synth_dataset(spec);
  }();
  DuoGestureModel model = [this] {
    std::vector<MotionSequence> motions;
    for (const auto& c : clips) motions.push_back(c.motion);
    return DuoGestureModel(cfg, pretrain_codec(motions, cfg));
  }();
};

void BM_ModelGenerate(benchmark::State& state) {
  DeskFixture f;
  for (auto _ : state) benchmark::DoNotOptimize(f.model.generate(f.clips[0].features));
}
BENCHMARK(BM_ModelGenerate)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  DeskFixture f;
  Trainer trainer(f.model, f.clips);
  const std::vector<int> batch = {0, 1, 2, 3, 4, 5, 6, 7};
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step(batch, 10));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace duogesture

BENCHMARK_MAIN();
