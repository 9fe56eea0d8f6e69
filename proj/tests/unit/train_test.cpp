#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "mpvit/checkpoint.hpp"
#include "mpvit/optimizer.hpp"
#include "mpvit/train.hpp"
#include "test_support.hpp"

using namespace mpvit;
using mpvit::testing::micro_config;
using mpvit::testing::random_sample;
using mpvit::testing::random_tensor;
using mpvit::testing::rng_for;
using mpvit::testing::scratch_dir;
using mpvit::testing::slurp;

TEST(CrossEntropy, Examples) {
  const double half[] = {0.5};
  EXPECT_NEAR(cross_entropy(half), std::log(2.0), 1e-15);
  EXPECT_NEAR(cross_entropy(half), 0.6931, 1e-4);
  const double one[] = {1.0};
  EXPECT_EQ(cross_entropy(one), 0.0);
  const double pair[] = {0.5, 0.25};
  EXPECT_NEAR(cross_entropy(pair), 1.0397, 1e-4);
  const double zero[] = {0.0};
  EXPECT_NEAR(cross_entropy(zero), -std::log(1e-12), 1e-9);
}

TEST(SampleLoss, AveragesHeadCrossEntropy) {
  ModelConfig c = micro_config();
  auto params = init_parameters<double>(c, 1);
  auto rng = rng_for(1);
  auto s = random_sample(c, rng, 1);
  auto pred = predict(c, params, s);
  const double expected = 0.5 * (-std::log(pred.head_probs[0]) - std::log(pred.head_probs[1]));
  Batch<double> batch{&s};
  EXPECT_NEAR(batch_loss(c, params, batch), expected, 1e-12);
}

namespace {

ParameterSet<double> single(double value, std::size_t n = 3) {
  ParameterSet<double> p;
  p.insert("w", Tensor<double>(Shape{n}, value));
  return p;
}

GradientMap<double> grad_of(double g, std::size_t n = 3) { return {{"w", Tensor<double>(Shape{n}, g)}}; }

}  // namespace

TEST(AdamW, FirstStepWithUnitGradient) {
  auto p = single(0.3);
  OptimizerState<double> st;
  AdamConfig cfg;
  cfg.lr = 1e-3;
  cfg.weight_decay = 0.0;
  adamw_step(p, grad_of(1.0), st, cfg);
  for (double v : p.at("w").data()) EXPECT_NEAR(v, 0.3 - 1e-3, 1e-9);
  EXPECT_EQ(st.step, 1);
}

TEST(AdamW, ZeroGradientNoDecayIsNoOp) {
  auto p = single(0.7);
  OptimizerState<double> st;
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  adamw_step(p, grad_of(0.0), st, cfg);
  EXPECT_EQ(p, single(0.7));
}

TEST(AdamW, DecayOnlyClosedForm) {
  auto p = single(2.0);
  OptimizerState<double> st;
  AdamConfig cfg;  // lr 1e-4, wd 1e-2
  adamw_step(p, grad_of(0.0), st, cfg);
  for (double v : p.at("w").data()) EXPECT_NEAR(v, 2.0 * (1 - 1e-6), 1e-15);
}

TEST(AdamW, MissingGradientCountsAsZero) {
  auto p = single(2.0);
  OptimizerState<double> st;
  AdamConfig cfg;
  adamw_step(p, {}, st, cfg);
  for (double v : p.at("w").data()) EXPECT_NEAR(v, 2.0 * (1 - 1e-6), 1e-15);
}

TEST(AdamW, ShapeMismatchRejected) {
  auto p = single(1.0, 3);
  OptimizerState<double> st;
  EXPECT_THROW(adamw_step(p, grad_of(1.0, 4), st, AdamConfig{}), DimensionError);
}

TEST(AdamWProperty, NoDecayMatchesHandAdam) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto rng = rng_for(seed);
    ParameterSet<double> p;
    p.insert("w", random_tensor(Shape{5}, rng));
    auto theta = p.at("w");
    std::vector<double> m(5, 0.0), v(5, 0.0);
    AdamConfig cfg;
    cfg.lr = 0.01;
    cfg.weight_decay = 0.0;
    OptimizerState<double> st;
    for (int t = 1; t <= 6; ++t) {
      auto g = random_tensor(Shape{5}, rng);
      adamw_step(p, {{"w", g}}, st, cfg);
      for (std::size_t i = 0; i < 5; ++i) {
        m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g[i] * g[i];
        const double mh = m[i] / (1 - std::pow(cfg.beta1, t));
        const double vh = v[i] / (1 - std::pow(cfg.beta2, t));
        theta[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
      }
      for (std::size_t i = 0; i < 5; ++i) ASSERT_NEAR(p.at("w")[i], theta[i], 1e-14) << "seed " << seed << " t " << t;
    }
  }
}

TEST(AdamW, CoupledModeAddsDecayToGradient) {
  AdamConfig coupled;
  coupled.decoupled = false;
  coupled.weight_decay = 0.5;
  coupled.lr = 0.1;
  auto a = single(2.0);
  OptimizerState<double> sa;
  adamw_step(a, grad_of(0.25), sa, coupled);

  AdamConfig plain = coupled;
  plain.weight_decay = 0.0;
  auto b = single(2.0);
  OptimizerState<double> sb;
  adamw_step(b, grad_of(0.25 + 0.5 * 2.0), sb, plain);
  EXPECT_EQ(a, b);
}

TEST(AdamW, ConfigValidation) {
  AdamConfig c;
  c.lr = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.beta2 = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  TrainConfig t;
  t.batch_size = 0;
  EXPECT_THROW(t.validate(), ConfigError);
}

namespace {

Dataset<double> random_set(const ModelConfig& c, std::uint64_t seed, std::size_t n) {
  auto rng = rng_for(seed);
  Dataset<double> d;
  for (std::size_t i = 0; i < n; ++i) {
    d.push_back(random_sample(c, rng, static_cast<int>(i % 2)));
    d.back().id = "s" + std::to_string(i);
  }
  return d;
}

Batch<double> all_of(const Dataset<double>& d) {
  Batch<double> b;
  for (const auto& s : d) b.push_back(&s);
  return b;
}

}  // namespace

TEST(TrainerProperty, OverfitsSixteenSamplesWithinFiftySteps) {
  ModelConfig c = micro_config();
  auto data = random_set(c, 3, 16);
  TrainConfig tc;
  tc.adam.lr = 3e-3;
  tc.adam.weight_decay = 0.0;
  Trainer<double> trainer(c, tc, init_parameters<double>(c, 0));
  const double initial = batch_loss(c, trainer.params(), all_of(data));
  for (int step = 0; step < 50; ++step) trainer.step(all_of(data));
  const double final_loss = batch_loss(c, trainer.params(), all_of(data));
  EXPECT_LT(final_loss, 0.1 * initial) << "initial " << initial << " final " << final_loss;
}

TEST(Trainer, ParameterBytesAreDeterministic) {
  ModelConfig c = micro_config();
  auto data = random_set(c, 4, 8);
  TrainConfig tc;
  tc.adam.lr = 1e-3;
  auto run = [&](std::size_t threads) {
    tc.threads = threads;
    Trainer<double> t(c, tc, init_parameters<double>(c, 1));
    for (int step = 0; step < 5; ++step) t.step(all_of(data));
    return t.params();
  };
  const auto a = run(1);
  EXPECT_EQ(a, run(1));
  EXPECT_EQ(a, run(2));
  EXPECT_NE(a, init_parameters<double>(c, 1));
}

TEST(Trainer, ParallelGradientMatchesSerial) {
  ModelConfig c = micro_config();
  auto data = random_set(c, 5, 6);
  auto params = init_parameters<double>(c, 2);
  auto serial = batch_loss_and_grad(c, params, all_of(data), 1);
  auto parallel = batch_loss_and_grad(c, params, all_of(data), 3);
  EXPECT_EQ(serial.loss, parallel.loss);
  EXPECT_EQ(serial.grads, parallel.grads);
  EXPECT_NEAR(serial.loss, batch_loss(c, params, all_of(data)), 1e-12);
}

TEST(Train, ZeroEpochsWritesInitialCheckpointAndHeaderOnlyLog) {
  auto dir = scratch_dir("train_zero");
  ModelConfig c = micro_config();
  auto tr = random_set(c, 6, 4), va = random_set(c, 7, 4);
  TrainConfig tc;
  tc.epochs = 0;
  auto result = train(c, tc, tr, va, {dir / "ckpt.mpvt", dir / "metrics.tsv"});
  EXPECT_TRUE(result.epochs.empty());
  EXPECT_EQ(slurp(dir / "metrics.tsv"), metrics_header() + "\n");
  auto ck = load_checkpoint(dir / "ckpt.mpvt");
  EXPECT_EQ(ck.params, init_parameters<double>(c, tc.seed));
  EXPECT_EQ(ck.info.epoch, 0);
  EXPECT_LT(ck.info.val_auc, 0.0);
}

TEST(Train, CheckpointHoldsRunningMaximum) {
  auto dir = scratch_dir("train_max");
  ModelConfig c = micro_config();
  auto tr = random_set(c, 8, 8), va = random_set(c, 9, 6);
  TrainConfig tc;
  tc.epochs = 5;
  tc.batch_size = 4;
  tc.adam.lr = 3e-3;
  std::vector<EpochMetrics> seen;
  auto result = train(c, tc, tr, va, {dir / "ckpt.mpvt", dir / "metrics.tsv"},
                      [&](const EpochMetrics& m) { seen.push_back(m); });
  ASSERT_EQ(seen.size(), 5u);
  double best = -1.0;
  std::size_t best_epoch = 0;
  for (const auto& m : seen) {
    if (m.val_auc > best) {
      best = m.val_auc;
      best_epoch = m.epoch;
    }
  }
  auto ck = load_checkpoint(dir / "ckpt.mpvt");
  EXPECT_EQ(ck.info.val_auc, best);
  EXPECT_EQ(static_cast<std::size_t>(ck.info.epoch), best_epoch);
  EXPECT_EQ(ck.params, result.best_params);

  std::string expected_log = metrics_header() + "\n";
  for (const auto& m : seen) expected_log += metrics_line(m) + "\n";
  EXPECT_EQ(slurp(dir / "metrics.tsv"), expected_log);
}

TEST(Train, SameSeedGivesIdenticalLogs) {
  ModelConfig c = micro_config();
  auto tr = random_set(c, 10, 8), va = random_set(c, 11, 4);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 4;
  auto a = scratch_dir("train_det_a"), b = scratch_dir("train_det_b");
  train(c, tc, tr, va, {a / "c.mpvt", a / "m.tsv"});
  train(c, tc, tr, va, {b / "c.mpvt", b / "m.tsv"});
  EXPECT_EQ(slurp(a / "m.tsv"), slurp(b / "m.tsv"));
  EXPECT_EQ(slurp(a / "c.mpvt"), slurp(b / "c.mpvt"));
}

TEST(Train, SingleClassSplitRejectedBeforeTraining) {
  ModelConfig c = micro_config();
  auto tr = random_set(c, 12, 4), va = random_set(c, 13, 4);
  for (auto& s : va) s.label = 0;
  TrainConfig tc;
  EXPECT_THROW(train(c, tc, tr, va), DataError);
  EXPECT_THROW(train(c, tc, Dataset<double>{}, tr), DataError);
}

TEST(Train, CheckedModeStopsOnNonFinite) {
  ModelConfig c = micro_config();
  auto data = random_set(c, 14, 2);
  data[0].axial[0] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig tc;
  tc.checked = true;
  Trainer<double> t(c, tc, init_parameters<double>(c, 0));
  EXPECT_THROW(t.step(all_of(data)), NonFiniteError);
}

TEST(Metrics, LogLineFormat) {
  EXPECT_EQ(metrics_header(), "epoch\ttrain_loss\tval_auc");
  EXPECT_EQ(metrics_line({3, 0.25, 0.875}), "3\t0.25\t0.875");
}
