#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "flesd/contrastive.hpp"
#include "flesd/dataset.hpp"
#include "flesd/error.hpp"
#include "flesd/finite_diff.hpp"
#include "flesd/linear_head.hpp"
#include "flesd/local_training.hpp"
#include "flesd/probe.hpp"
#include "oracles.hpp"

namespace flesd {
namespace {

using oracle::small_encoder;

TEST(InfoNce, IdenticalRepresentationsGiveLogTwoBMinusOne) {
  for (std::size_t b : {2u, 3u, 8u, 33u}) {
    const Matrix z(b, 4, 0.5);
    EXPECT_NEAR(info_nce_loss(z, z, 0.4), std::log(2.0 * static_cast<double>(b) - 1.0), 1e-12);
  }
}

TEST(InfoNce, TwoSampleBatchMatchesBruteForce) {
  const double s = std::sqrt(0.5);
  const Matrix a = Matrix::from_rows({{1, 0}, {s, s}});
  const Matrix b = Matrix::from_rows({{0.6, 0.8}, {0, 1}});
  EXPECT_NEAR(info_nce_loss(a, b, 0.5), oracle::nt_xent(a, b, 0.5), 1e-10);

  // Symmetric NT-Xent = mean of the two one-sided terms plus within-view negatives.
  Rng rng(1);
  const Matrix x = oracle::random_unit_rows(2, 3, rng);
  const Matrix y = oracle::random_unit_rows(2, 3, rng);
  EXPECT_NEAR(info_nce_loss(x, y, 0.3), oracle::nt_xent(x, y, 0.3), 1e-10);
  EXPECT_GE(info_nce_loss(x, y, 0.3),
            0.5 * (oracle::info_nce_one_sided(x, y, 0.3) + oracle::info_nce_one_sided(y, x, 0.3)));
}

TEST(InfoNce, RandomBatchesMatchOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = oracle::random_unit_rows(9, 5, rng);
    const Matrix b = oracle::random_unit_rows(9, 5, rng);
    const double loss = info_nce_loss(a, b, 0.2);
    EXPECT_NEAR(loss, oracle::nt_xent(a, b, 0.2), 1e-10);
    EXPECT_GE(loss, 0.0);
  }
}

TEST(InfoNce, PermutationInvariant) {
  Rng rng(3);
  const Matrix a = oracle::random_unit_rows(6, 4, rng);
  const Matrix b = oracle::random_unit_rows(6, 4, rng);
  const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  EXPECT_NEAR(info_nce_loss(gather_rows(a, perm), gather_rows(b, perm), 0.4),
              info_nce_loss(a, b, 0.4), 1e-12);
}

TEST(InfoNce, Errors) {
  EXPECT_THROW(info_nce_loss(Matrix(1, 3, 1.0), Matrix(1, 3, 1.0), 0.4), ParameterError);
  EXPECT_THROW(info_nce_loss(Matrix(3, 3, 1.0), Matrix(2, 3, 1.0), 0.4), DimensionError);
  EXPECT_THROW(info_nce_loss(Matrix(3, 3, 1.0), Matrix(3, 3, 1.0), 0.0), ParameterError);
}

TEST(InfoNce, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  ParamTensor a(oracle::random_unit_rows(5, 3, rng));
  ParamTensor b(oracle::random_unit_rows(5, 3, rng));
  Tape tape;
  tape.backward(info_nce_loss(tape, tape.param(a), tape.param(b), 0.4));
  for (ParamTensor* p : {&a, &b}) {
    const Matrix analytic = p->grad;
    const Matrix fd = finite_diff_gradient([&] { return info_nce_loss(a.value, b.value, 0.4); }, *p);
    EXPECT_LT(relative_error(analytic, fd), 1e-4);
  }
}

TEST(InfoNce, GradientThroughEncoderMatchesFiniteDifferences) {
  Rng rng(5);
  EncoderParams p = init_encoder(small_encoder({4, 6, 3}, 2));
  const Matrix xa = oracle::random_matrix(4, 4, rng);
  const Matrix xb = oracle::random_matrix(4, 4, rng);
  auto build = [&](Tape& t) {
    return info_nce_loss(t, encode(t, p, t.constant(xa)), encode(t, p, t.constant(xb)), 0.4);
  };
  p.zero_grad();
  Tape tape;
  tape.backward(build(tape));
  for (ParamTensor* t : p.tensors()) {
    const Matrix analytic = t->grad;
    const Matrix fd = finite_diff_gradient([&] {
      Tape tp;
      return tp.scalar(build(tp));
    }, *t);
    EXPECT_LT(relative_error(analytic, fd), 1e-4);
  }
}

TEST(EpochBatches, DropsPartialBatchAndCoversRows) {
  const auto batches = epoch_batches(10, 4, 7);
  ASSERT_EQ(batches.size(), 2u);
  std::vector<std::size_t> seen;
  for (const auto& b : batches) {
    EXPECT_EQ(b.size(), 4u);
    seen.insert(seen.end(), b.begin(), b.end());
  }
  std::sort(seen.begin(), seen.end());
  EXPECT_EQ(std::adjacent_find(seen.begin(), seen.end()), seen.end());
  EXPECT_EQ(epoch_batches(10, 4, 7), batches);
}

class SimclrTest : public ::testing::Test {
 protected:
  Dataset shard = synth_gaussian_blobs(2, 40, 6, 0.5, 17);
  EncoderParams init = init_encoder(small_encoder({6, 16, 4}, 3, Activation::kRelu));
  ContrastiveConfig cfg{.temperature = 0.4, .batch_size = 16, .epochs = 2, .lr = 1e-3,
                        .aug = {.noise_sigma = 0.2}};
};

TEST_F(SimclrTest, ZeroEpochsLeavesParamsUnchanged) {
  cfg.epochs = 0;
  const auto result = train_simclr_local(init, shard, cfg, std::nullopt, 1);
  EXPECT_EQ(result.params, init);
  EXPECT_TRUE(result.epoch_losses.empty());
}

TEST_F(SimclrTest, DeterministicGivenSeed) {
  const auto a = train_simclr_local(init, shard, cfg, std::nullopt, 5);
  const auto b = train_simclr_local(init, shard, cfg, std::nullopt, 5);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.epoch_losses, b.epoch_losses);
  EXPECT_EQ(a.epoch_losses.size(), 2u);
  EXPECT_NE(train_simclr_local(init, shard, cfg, std::nullopt, 6).params, a.params);
}

TEST_F(SimclrTest, ZeroProxMatchesPlainPath) {
  const auto plain = train_simclr_local(init, shard, cfg, std::nullopt, 5);
  const auto prox = train_simclr_local(init, shard, cfg, ProximalTerm{{0.0}, init}, 5);
  EXPECT_EQ(plain.params, prox.params);
  EXPECT_EQ(plain.epoch_losses, prox.epoch_losses);
}

TEST_F(SimclrTest, HugeProxPinsParamsToAnchor) {
  const auto result = train_simclr_local(init, shard, cfg, ProximalTerm{{1e6}, init}, 5);
  const auto trained = result.params.tensors();
  const auto anchor = init.tensors();
  for (std::size_t t = 0; t < trained.size(); ++t) {
    EXPECT_LT(max_abs_diff(trained[t]->value, anchor[t]->value), 1e-2);
  }
}

TEST_F(SimclrTest, SmallShardClampsBatch) {
  const std::vector<std::size_t> rows{0, 1, 2, 40, 41};
  const auto result = train_simclr_local(init, shard.subset(rows), cfg, std::nullopt, 1);
  EXPECT_FALSE(result.warnings.empty());
  EXPECT_NE(result.params, init);
}

TEST_F(SimclrTest, EmptyShardThrows) {
  EXPECT_THROW(train_simclr_local(init, shard.subset({}), cfg, std::nullopt, 1), Error);
}

TEST(Simclr, TrainingImprovesProbeOnTwoClasses) {
  const Dataset ds = synth_gaussian_blobs(2, 200, 8, 2.0, 31);
  const auto split = train_test_split(ds, 0.5, 1);
  const EncoderParams init = init_encoder(small_encoder({8, 32, 4}, 4, Activation::kRelu));
  const ContrastiveConfig cfg{.temperature = 0.4, .batch_size = 32, .epochs = 30, .lr = 1e-3,
                              .aug = {.noise_sigma = 0.3, .mask_prob = 0.1, .scale_lo = 0.8,
                                      .scale_hi = 1.2}};
  const auto trained = train_simclr_local(init, split.train, cfg, std::nullopt, 2);
  EXPECT_LT(trained.epoch_losses.back(), trained.epoch_losses.front());
  const ProbeConfig probe{.epochs = 50, .lr = 1e-2, .batch_size = 64, .seed = 3};
  const double before = linear_probe(init, split.train, split.test, probe).accuracy;
  const double after = linear_probe(trained.params, split.train, split.test, probe).accuracy;
  EXPECT_GT(after, before);
}

TEST(Supervised, UniformPredictorCostsLogC) {
  const Matrix logits(5, 7, 0.0);
  const std::vector<int> labels{0, 3, 6, 2, 2};
  EXPECT_NEAR(softmax_cross_entropy(logits, labels), std::log(7.0), 1e-12);
}

TEST(Supervised, HeadGradientMatchesFiniteDifferences) {
  Rng rng(8);
  LinearHead head = LinearHead::glorot(4, 3, 2);
  const Matrix reps = oracle::random_unit_rows(6, 4, rng);
  const std::vector<int> labels{0, 1, 2, 2, 1, 0};
  Tape tape;
  tape.backward(softmax_cross_entropy(tape, head.logits(tape, tape.constant(reps)), labels));
  for (ParamTensor* p : head.tensors()) {
    const Matrix analytic = p->grad;
    const Matrix fd = finite_diff_gradient(
        [&] { return softmax_cross_entropy(head.logits(reps), labels); }, *p);
    EXPECT_LT(relative_error(analytic, fd), 1e-4);
  }
}

TEST(Supervised, SingleClassShardReachesFullAccuracy) {
  const Dataset ds = synth_gaussian_blobs(3, 30, 5, 1.0, 4);
  std::vector<std::size_t> rows(30);
  std::iota(rows.begin(), rows.end(), 30);
  const Dataset shard = ds.subset(rows);
  const auto result = train_supervised_local(init_encoder(small_encoder({5, 8, 4}, 1)),
                                             LinearHead::glorot(4, 3, 1), shard,
                                             {.batch_size = 10, .epochs = 20, .lr = 1e-2, .aug = {}}, 1);
  EXPECT_DOUBLE_EQ(result.epoch_accuracy.back(), 1.0);
  EXPECT_DOUBLE_EQ(classification_accuracy(result.params, result.head, shard), 1.0);
}

TEST(Supervised, LearnsSeparableBlobs) {
  const Dataset ds = synth_gaussian_blobs(4, 50, 6, 0.3, 9);
  const auto result = train_supervised_local(init_encoder(small_encoder({6, 16, 4}, 2)),
                                             LinearHead::glorot(4, 4, 2), ds,
                                             {.batch_size = 20, .epochs = 40, .lr = 1e-2, .aug = {}}, 3);
  EXPECT_GT(classification_accuracy(result.params, result.head, ds), 0.95);
}

}  // namespace
}  // namespace flesd
