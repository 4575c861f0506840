#include <gtest/gtest.h>

#include <random>

#include "venation/callbacks.hpp"

using namespace venation;

namespace {

// Feeds losses until the callback says stop; returns epochs consumed.
int run_until_stop(EarlyStopping& es, const std::vector<double>& losses) {
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (es.step(losses[i]) == StopDecision::stop) return static_cast<int>(i + 1);
  }
  return -1;
}

}  // namespace

TEST(EarlyStop, StopsFiveEpochsAfterBest) {
  EarlyStopping es(5);
  EXPECT_EQ(run_until_stop(es, {1.0, 0.9, 0.8, 0.81, 0.82, 0.83, 0.84, 0.85}), 8);
  EXPECT_EQ(es.best_epoch(), 3);
  EXPECT_DOUBLE_EQ(es.best(), 0.8);
}

TEST(EarlyStop, MonotoneImprovementContinues) {
  EarlyStopping es(5);
  EXPECT_EQ(run_until_stop(es, {0.5, 0.4, 0.3}), -1);
  EXPECT_EQ(es.best_epoch(), 3);
  EXPECT_TRUE(es.improved());
}

TEST(EarlyStop, FlatLossStopsAtSix) {
  EarlyStopping es(5);
  EXPECT_EQ(run_until_stop(es, std::vector<double>(6, 0.5)), 6);
  EXPECT_EQ(es.best_epoch(), 1);
}

TEST(EarlyStop, TieIsNotImprovement) {
  EarlyStopping es(2);
  es.step(0.4);
  es.step(0.4);
  EXPECT_FALSE(es.improved());
  EXPECT_EQ(es.wait(), 1);
  EXPECT_EQ(es.step(0.4), StopDecision::stop);
  EXPECT_EQ(es.best_epoch(), 1);
}

TEST(EarlyStop, ImprovementResetsPatience) {
  EarlyStopping es(2);
  EXPECT_EQ(run_until_stop(es, {1.0, 1.1, 0.9, 1.2, 0.8, 0.85, 0.86}), 7);
  EXPECT_EQ(es.best_epoch(), 5);
}

TEST(EarlyStop, RejectsZeroPatience) {
  EXPECT_THROW(EarlyStopping(0), ConfigError);
}

TEST(Plateau, HalvesEveryTwoStagnantEpochs) {
  PlateauScheduler s(1e-3, 0.5, 2, 1e-6);
  std::vector<double> lrs;
  for (int e = 1; e <= 9; ++e) lrs.push_back(s.step(0.1 * e));
  // epoch 1 sets the minimum; epochs 2-3, 4-5, 6-7, 8-9 are plateaus
  const std::vector<double> expected{1e-3,    1e-3,     5e-4,      5e-4,     2.5e-4,
                                     2.5e-4,  1.25e-4,  1.25e-4,   6.25e-5};
  ASSERT_EQ(lrs.size(), expected.size());
  for (std::size_t i = 0; i < lrs.size(); ++i) EXPECT_DOUBLE_EQ(lrs[i], expected[i]);
}

TEST(Plateau, FlooredAtMinimum) {
  PlateauScheduler s(1e-3, 0.1, 1, 2e-5);
  s.step(1.0);
  EXPECT_DOUBLE_EQ(s.step(1.0), 1e-4);
  EXPECT_DOUBLE_EQ(s.step(1.0), 2e-5);
  EXPECT_DOUBLE_EQ(s.step(1.0), 2e-5);
}

TEST(Plateau, NonIncreasingStepFunctionOfExactFactors) {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> loss(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    PlateauScheduler s(1e-2, 0.5, 2, 1e-6);
    double prev = s.learning_rate();
    for (int e = 0; e < 40; ++e) {
      const double lr = s.step(loss(rng));
      EXPECT_LE(lr, prev);
      EXPECT_GE(lr, 1e-6);
      if (lr < prev && lr > 1e-6) EXPECT_DOUBLE_EQ(lr, prev * 0.5);
      prev = lr;
    }
  }
}

TEST(Plateau, RejectsBadSettings) {
  EXPECT_THROW(PlateauScheduler(1e-3, 1.0, 2, 0), ConfigError);
  EXPECT_THROW(PlateauScheduler(1e-3, 0.5, 0, 0), ConfigError);
}
