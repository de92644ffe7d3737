#include <random>

#include <benchmark/benchmark.h>

#include "flesd/contrastive.hpp"
#include "flesd/dataset.hpp"
#include "flesd/encoder.hpp"
#include "flesd/esd.hpp"
#include "flesd/local_training.hpp"
#include "flesd/matrix.hpp"
#include "flesd/similarity.hpp"

namespace {

using namespace flesd;

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = n(rng);
  return m;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1);
  const Matrix b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_InfoNceForwardBackward(benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0));
  ParamTensor za(l2_normalize_rows(random_matrix(b, 16, 3)));
  ParamTensor zb(l2_normalize_rows(random_matrix(b, 16, 4)));
  for (auto _ : state) {
    za.zero_grad();
    zb.zero_grad();
    Tape tape;
    tape.backward(info_nce_loss(tape, tape.param(za), tape.param(zb), 0.4));
    benchmark::DoNotOptimize(za.grad.data().data());
  }
}
BENCHMARK(BM_InfoNceForwardBackward)->Arg(64)->Arg(256);

void BM_SimilarityPipeline(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const RepresentationMatrix r{transpose(l2_normalize_rows(random_matrix(n, 8, 5))), 0};
  for (auto _ : state) benchmark::DoNotOptimize(sharpen(similarity_matrix(r), 0.1));
}
BENCHMARK(BM_SimilarityPipeline)->Arg(256)->Arg(1024);

void BM_DistillEpoch(benchmark::State& state) {
  const Dataset pub = synth_gaussian_blobs(8, 64, 10, 0.7, 6);
  const EncoderParams teacher = init_encoder({{10, 64, 64, 4}, Activation::kRelu, 7});
  const EnsembleTarget target = sharpen(similarity_matrix(infer_representations(teacher, pub)), 0.1);
  const EncoderParams student = init_encoder({{10, 64, 64, 4}, Activation::kRelu, 8});
  const EsdConfig cfg{.anchor_capacity = 256, .batch_size = 128, .epochs = 1};
  for (auto _ : state) benchmark::DoNotOptimize(distill(student, target, pub, cfg, {.noise_sigma = 0.3}, 9));
}
BENCHMARK(BM_DistillEpoch)->Unit(benchmark::kMillisecond);

void BM_LocalEpoch(benchmark::State& state) {
  const Dataset shard = synth_gaussian_blobs(8, 64, 10, 0.7, 10);
  const EncoderParams init = init_encoder({{10, 64, 64, 4}, Activation::kRelu, 11});
  const ContrastiveConfig cfg{.batch_size = 64, .epochs = 1, .aug = {.noise_sigma = 0.3}};
  for (auto _ : state) benchmark::DoNotOptimize(train_simclr_local(init, shard, cfg, std::nullopt, 12));
}
BENCHMARK(BM_LocalEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
