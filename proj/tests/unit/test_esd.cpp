#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "flesd/dataset.hpp"
#include "flesd/error.hpp"
#include "flesd/esd.hpp"
#include "flesd/finite_diff.hpp"
#include "flesd/local_training.hpp"
#include "flesd/momentum_queue.hpp"
#include "flesd/probe.hpp"
#include "flesd/similarity.hpp"
#include "oracles.hpp"

namespace flesd {
namespace {

using oracle::small_encoder;

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

TEST(EsdConfig, Validation) {
  EXPECT_NO_THROW(EsdConfig{}.validate());
  EXPECT_THROW((EsdConfig{.student_temperature = 0.2}.validate()), ParameterError);
  EXPECT_NO_THROW((EsdConfig{.student_temperature = 0.2, .allow_temperature_mismatch = true}.validate()));
  EXPECT_THROW((EsdConfig{.momentum = 1.5}.validate()), ParameterError);
  EXPECT_THROW((EsdConfig{.anchor_capacity = 8, .batch_size = 16}.validate()), ParameterError);
}

TEST(Ema, BoundaryFactors) {
  const EncoderParams theta = init_encoder(small_encoder({3, 4, 2}, 1));
  const EncoderParams mu0 = init_encoder(small_encoder({3, 4, 2}, 2));
  EncoderParams mu = mu0;
  ema_update(mu, theta, 1.0);
  EXPECT_EQ(mu, mu0);
  ema_update(mu, theta, 0.0);
  EXPECT_EQ(mu, theta);
}

TEST(Ema, ScalarHalfway) {
  EncoderParams mu = init_encoder(small_encoder({1, 2}, 0));
  EncoderParams theta = mu;
  for (ParamTensor* t : mu.tensors()) t->value.fill(2.0);
  for (ParamTensor* t : theta.tensors()) t->value.fill(4.0);
  ema_update(mu, theta, 0.5);
  for (const ParamTensor* t : mu.tensors())
    for (double v : t->value.data()) EXPECT_EQ(v, 3.0);
}

TEST(Ema, ContractsTowardStudent) {
  const EncoderParams theta = init_encoder(small_encoder({3, 5, 2}, 1));
  const EncoderParams mu0 = init_encoder(small_encoder({3, 5, 2}, 7));
  EncoderParams mu = mu0;
  ema_update(mu, theta, 0.9);
  for (std::size_t t = 0; t < theta.tensors().size(); ++t) {
    const Matrix& a = mu.tensors()[t]->value;
    const Matrix& b = mu0.tensors()[t]->value;
    const Matrix& s = theta.tensors()[t]->value;
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_NEAR(a.data()[i] - s.data()[i], 0.9 * (b.data()[i] - s.data()[i]), 1e-15);
    }
  }
}

TEST(Ema, ArchitectureMismatch) {
  EncoderParams mu = init_encoder(small_encoder({3, 4, 2}, 1));
  EXPECT_THROW(ema_update(mu, init_encoder(small_encoder({3, 5, 2}, 1)), 0.5), DimensionError);
}

Matrix unit_row(std::size_t d, std::size_t hot) {
  Matrix m(1, d);
  m(0, hot) = 1.0;
  return m;
}

TEST(Queue, EvictsOldestFirst) {
  MomentumQueue q(2);
  const std::vector<std::size_t> idx{7, 8, 9};
  q.push(idx, Matrix::identity(3));
  EXPECT_EQ(q.indices(), (std::vector<std::size_t>{8, 9}));
  EXPECT_EQ(q.representations(), Matrix::from_rows({{0, 1, 0}, {0, 0, 1}}));
  q.push({}, Matrix(0, 3));
  EXPECT_EQ(q.size(), 2u);
}

TEST(Queue, FillsToCapacity) {
  MomentumQueue q(4);
  q.push(std::vector<std::size_t>{0, 1, 2, 3}, Matrix::identity(4));
  EXPECT_EQ(q.size(), 4u);
}

TEST(Queue, RejectsNonUnitRowsAtomically) {
  MomentumQueue q(5);
  q.push(std::vector<std::size_t>{1}, unit_row(2, 0));
  EXPECT_THROW(q.push(std::vector<std::size_t>{2, 3}, Matrix::from_rows({{0, 1}, {0.5, 0.5}})),
               DegenerateInputError);
  EXPECT_EQ(q.size(), 1u);
  EXPECT_THROW(MomentumQueue(0), ParameterError);
}

TEST(Queue, FifoPropertyOverManyOperations) {
  Rng rng(3);
  const std::size_t capacity = 37;
  MomentumQueue q(capacity);
  std::deque<std::size_t> model;
  std::size_t next = 0;
  std::uniform_int_distribution<std::size_t> len(0, 9);
  for (int op = 0; op < 1500; ++op) {
    const std::size_t n = len(rng);
    std::vector<std::size_t> tags(n);
    for (auto& t : tags) {
      t = next++;
      model.push_back(t);
    }
    while (model.size() > capacity) model.pop_front();
    q.push(tags, oracle::random_unit_rows(n, 3, rng));
    ASSERT_LE(q.size(), capacity);
    ASSERT_EQ(q.indices(), std::vector<std::size_t>(model.begin(), model.end()));
  }
}

TEST(TargetProbs, ConstantRowIsUniform) {
  EnsembleTarget t{Matrix(4, 4, 3.0), 0.1};
  const std::vector<std::size_t> anchors{0, 2, 3};
  const auto p = target_probs(t, 1, anchors);
  ASSERT_EQ(p.size(), 3u);
  for (double v : p) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(target_probs(t, 1, std::vector<std::size_t>{2}), std::vector<double>{1.0});
}

TEST(TargetProbs, MatchesHandNormalization) {
  Rng rng(4);
  const EnsembleTarget t = oracle::random_target(5, rng);
  const std::vector<std::size_t> anchors{0, 2, 4};
  const auto p = target_probs(t, 1, anchors);
  const auto ref = oracle::target_probs(t.entries, 1, anchors);
  ASSERT_EQ(p.size(), ref.size());
  for (std::size_t j = 0; j < p.size(); ++j) EXPECT_NEAR(p[j], ref[j], 1e-12);
  EXPECT_NEAR(sum(p), 1.0, 1e-9);
}

TEST(TargetProbs, DropsSelfAnchors) {
  Rng rng(5);
  const EnsembleTarget t = oracle::random_target(6, rng);
  const std::vector<std::size_t> anchors{3, 1, 3, 5};
  EXPECT_EQ(kept_anchor_positions(3, anchors), (std::vector<std::size_t>{1, 3}));
  const auto p = target_probs(t, 3, anchors);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_NEAR(p[0], t.entries(3, 1) / (t.entries(3, 1) + t.entries(3, 5)), 1e-15);
  EXPECT_THROW(target_probs(t, 3, std::vector<std::size_t>{3, 3}), DegenerateInputError);
  EXPECT_THROW(target_probs(t, 9, anchors), DimensionError);
}

TEST(TargetProbs, InvariantToPositiveScaling) {
  Rng rng(6);
  EnsembleTarget t = oracle::random_target(7, rng);
  const std::vector<std::size_t> anchors{0, 1, 4, 6, 2};
  const auto p = target_probs(t, 3, anchors);
  t.entries = 1234.5 * t.entries;
  const auto scaled = target_probs(t, 3, anchors);
  for (std::size_t j = 0; j < p.size(); ++j) EXPECT_NEAR(p[j], scaled[j], 1e-14);
}

TEST(StudentProbs, UniformWhenAnchorsCoincide) {
  const Matrix anchors = Matrix::from_rows({{0.6, 0.8}, {0.6, 0.8}, {0.6, 0.8}, {0.6, 0.8}});
  const std::vector<double> query{1.0, 0.0};
  for (double v : student_probs(query, anchors, 0.1)) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(StudentProbs, OrthogonalAnchorsAnalytic) {
  const Matrix anchors = Matrix::identity(5);
  const std::vector<double> query{0, 0, 1, 0, 0};
  const auto q = student_probs(query, anchors, 0.1);
  const double e10 = std::exp(10.0);
  EXPECT_NEAR(q[2], e10 / (e10 + 4.0), 1e-12);
  EXPECT_NEAR(q[0], 1.0 / (e10 + 4.0), 1e-16);
  EXPECT_NEAR(sum(q), 1.0, 1e-9);
  EXPECT_THROW(student_probs(query, anchors, 0.0), ParameterError);
}

TEST(StudentProbs, MatchesSoftmaxOracle) {
  Rng rng(7);
  const Matrix anchors = oracle::random_unit_rows(9, 4, rng);
  const Matrix query = oracle::random_unit_rows(1, 4, rng);
  std::vector<double> logits;
  for (std::size_t j = 0; j < 9; ++j) logits.push_back(oracle::row_dot(query, 0, anchors, j));
  const auto ref = oracle::softmax(logits, 0.1);
  const auto q = student_probs(query.row(0), anchors, 0.1);
  for (std::size_t j = 0; j < 9; ++j) EXPECT_NEAR(q[j], ref[j], 1e-12);
}

TEST(StudentProbs, VjpMatchesFiniteDifferences) {
  Rng rng(8);
  const Matrix anchors = oracle::random_unit_rows(6, 3, rng);
  Matrix query = oracle::random_unit_rows(1, 3, rng);
  const std::vector<double> upstream{0.3, -1.2, 0.5, 2.0, -0.7, 0.1};
  const auto g = student_probs_vjp(query.row(0), anchors, 0.1, upstream);
  const Matrix fd = finite_diff_gradient([&] {
    const auto q = student_probs(query.row(0), anchors, 0.1);
    double s = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) s += upstream[j] * q[j];
    return s;
  }, query);
  EXPECT_LT(relative_error(Matrix(1, 3, g), fd), 1e-4);
}

TEST(EsdLoss, Examples) {
  const std::vector<double> p{0.2, 0.5, 0.3};
  EXPECT_EQ(esd_loss(p, p), 0.0);
  EXPECT_NEAR(esd_loss(std::vector<double>{1 - 1e-12, 1e-12}, std::vector<double>{0.5, 0.5}),
              std::log(2.0), 1e-9);
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = oracle::softmax({std::normal_distribution<>()(rng), std::normal_distribution<>()(rng),
                                    std::normal_distribution<>()(rng), std::normal_distribution<>()(rng)},
                                   1.0);
    const auto b = oracle::softmax({std::normal_distribution<>()(rng), std::normal_distribution<>()(rng),
                                    std::normal_distribution<>()(rng), std::normal_distribution<>()(rng)},
                                   1.0);
    EXPECT_NEAR(esd_loss(a, b), oracle::kl(a, b), 1e-12);
    EXPECT_GT(esd_loss(a, b), 0.0);
  }
  EXPECT_THROW(esd_loss(p, std::vector<double>{0.5, 0.5}), DimensionError);
}

TEST(EsdBatchLoss, MatchesOracleAndFiniteDifferences) {
  Rng rng(10);
  const EnsembleTarget target = oracle::random_target(8, rng, 0.5);
  const std::vector<std::size_t> query_idx{1, 4, 6};
  const std::vector<std::size_t> anchor_idx{0, 1, 2, 3, 4, 5};
  const Matrix anchors = oracle::random_unit_rows(6, 3, rng);
  ParamTensor queries(oracle::random_unit_rows(3, 3, rng));

  double ref = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto p = oracle::target_probs(target.entries, query_idx[i], anchor_idx);
    std::vector<double> logits;
    for (std::size_t j = 0; j < anchor_idx.size(); ++j) {
      if (anchor_idx[j] != query_idx[i]) logits.push_back(oracle::row_dot(queries.value, i, anchors, j));
    }
    ref += oracle::kl(p, oracle::softmax(logits, 0.5)) / 3.0;
  }

  Tape tape;
  const Var loss = esd_batch_loss(tape, tape.param(queries), query_idx, anchors, anchor_idx, target, 0.5);
  EXPECT_NEAR(tape.scalar(loss), ref, 1e-12);
  tape.backward(loss);
  const Matrix fd = finite_diff_gradient([&] {
    Tape t;
    return t.scalar(esd_batch_loss(t, t.constant(queries.value), query_idx, anchors, anchor_idx, target, 0.5));
  }, queries);
  EXPECT_LT(relative_error(queries.grad, fd), 1e-4);
}

TEST(EsdBatchLoss, GradientThroughEncoder) {
  Rng rng(11);
  const EnsembleTarget target = oracle::random_target(6, rng, 0.5);
  EncoderParams p = init_encoder(small_encoder({4, 6, 3}, 3));
  const Matrix x = oracle::random_matrix(3, 4, rng);
  const Matrix anchors = oracle::random_unit_rows(4, 3, rng);
  const std::vector<std::size_t> qi{0, 2, 5};
  const std::vector<std::size_t> ai{1, 2, 3, 4};
  auto build = [&](Tape& t) { return esd_batch_loss(t, encode(t, p, t.constant(x)), qi, anchors, ai, target, 0.5); };
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

TEST(EsdBatchLoss, NoUsableAnchor) {
  Rng rng(12);
  const EnsembleTarget target = oracle::random_target(4, rng);
  const std::vector<std::size_t> qi{2};
  const std::vector<std::size_t> ai{2};
  Tape tape;
  EXPECT_THROW(esd_batch_loss(tape, tape.constant(oracle::random_unit_rows(1, 3, rng)), qi,
                              oracle::random_unit_rows(1, 3, rng), ai, target, 0.1),
               DegenerateInputError);
}

class DistillTest : public ::testing::Test {
 protected:
  Dataset pub = synth_gaussian_blobs(3, 20, 5, 0.5, 2);
  EncoderParams student = init_encoder(small_encoder({5, 8, 3}, 4, Activation::kRelu));
  EsdConfig cfg{.anchor_capacity = 16, .batch_size = 8, .epochs = 3};
  AugmentationConfig aug{.noise_sigma = 0.1};
  EnsembleTarget target =
      sharpen(similarity_matrix(infer_representations(init_encoder(small_encoder({5, 8, 3}, 9)), pub)), 0.1);
};

TEST_F(DistillTest, ZeroEpochsLeavesStudentUnchanged) {
  cfg.epochs = 0;
  const auto r = distill(student, target, pub, cfg, aug, 1);
  EXPECT_EQ(r.student, student);
  EXPECT_EQ(r.optimizer_steps, 0u);
}

TEST_F(DistillTest, DeterministicTrajectories) {
  const auto a = distill(student, target, pub, cfg, aug, 1);
  const auto b = distill(student, target, pub, cfg, aug, 1);
  EXPECT_EQ(a.student, b.student);
  ASSERT_EQ(a.epoch_losses.size(), 3u);
  for (std::size_t e = 0; e < 3; ++e) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(a.epoch_losses[e]), std::bit_cast<std::uint64_t>(b.epoch_losses[e]));
  }
  EXPECT_GT(a.optimizer_steps, 0u);
  EXPECT_NE(a.student, student);
}

TEST_F(DistillTest, WarmupDelaysFirstStep) {
  // 60 samples, batch 8 -> 7 iterations per epoch; the queue reaches 16 after two pushes.
  cfg.epochs = 1;
  EXPECT_EQ(distill(student, target, pub, cfg, aug, 1).optimizer_steps, 5u);
}

TEST_F(DistillTest, Errors) {
  EXPECT_THROW(distill(student, target, pub.subset({}), cfg, aug, 1), DegenerateInputError);
  const std::vector<std::size_t> rows{0, 1, 2};
  EXPECT_THROW(distill(student, target, pub.subset(rows), cfg, aug, 1), DimensionError);
}

TEST(Distill, SingleTeacherBeatsRandomEncoder) {
  const Dataset ds = synth_gaussian_blobs(4, 150, 8, 0.7, 5);
  const auto split = train_test_split(ds, 0.8, 1);
  const EncoderConfig arch = small_encoder({8, 32, 4}, 6, Activation::kRelu);
  const AugmentationConfig aug{.noise_sigma = 0.3, .mask_prob = 0.1, .scale_lo = 0.8, .scale_hi = 1.2};
  const auto teacher = train_simclr_local(init_encoder(arch), split.train,
                                          {.temperature = 0.4, .batch_size = 64, .epochs = 40, .aug = aug},
                                          std::nullopt, 2);
  const EnsembleTarget target = sharpen(similarity_matrix(infer_representations(teacher.params, split.train)), 0.1);
  EncoderConfig student_arch = arch;
  student_arch.init_seed = 7;
  const EncoderParams random = init_encoder(student_arch);
  const auto student = distill(random, target, split.train,
                               {.anchor_capacity = 256, .batch_size = 64, .epochs = 40}, aug, 3);
  const ProbeConfig probe{.epochs = 60, .lr = 1e-2, .batch_size = 64, .seed = 4};
  const double random_acc = linear_probe(random, split.train, split.test, probe).accuracy;
  const double student_acc = linear_probe(student.student, split.train, split.test, probe).accuracy;
  EXPECT_GT(student_acc, random_acc);
}

}  // namespace
}  // namespace flesd
