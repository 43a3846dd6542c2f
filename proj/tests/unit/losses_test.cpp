// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

#include "musebar/losses.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <nlohmann/json.hpp>
#include <set>

#include "musebar/chords.hpp"
#include "test_util.hpp"

namespace musebar {
namespace {

// Straight-line log-softmax + gather.
double oracle_nll(const MatrixT<float>& logits, const std::vector<TokenId>& targets) {
  double total = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    double z = 0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) z += std::exp(static_cast<double>(logits(r, c)));
    total += std::log(z) - logits(r, targets[static_cast<std::size_t>(r)]);
  }
  return total;
}

TEST(LossLikelihood, UniformLogitsGiveNLogV) {
  const MatrixT<float> logits = MatrixT<float>::Constant(7, 436, 0.25f);
  const std::vector<TokenId> targets = {0, 5, 100, 435, 3, 3, 9};
  EXPECT_NEAR(loss_pretrain(logits, targets), 7 * std::log(436.0), 1e-4);
  EXPECT_NEAR(loss_bft(logits, targets), 7 * std::log(436.0), 1e-4);
}

TEST(LossLikelihood, ConfidentCorrectLogitsApproachZero) {
  MatrixT<float> logits = MatrixT<float>::Zero(4, 10);
  const std::vector<TokenId> targets = {1, 2, 3, 4};
  for (int r = 0; r < 4; ++r) logits(r, targets[static_cast<std::size_t>(r)]) = 60.0f;
  EXPECT_LT(loss_pretrain(logits, targets), 1e-20);
  EXPECT_GE(loss_pretrain(logits, targets), 0.0);
}

TEST(LossLikelihood, RandomCasesMatchOracleAndGradient) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = rng.uniform_range(1, 30), v = rng.uniform_range(2, 50);
    MatrixT<float> logits(n, v);
    for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = static_cast<float>(3 * rng.normal());
    std::vector<TokenId> targets;
    for (int r = 0; r < n; ++r) targets.push_back(rng.uniform_range(0, v - 1));
    MatrixT<float> d;
    const double a = loss_pretrain(logits, targets, &d);
    EXPECT_NEAR(a, oracle_nll(logits, targets), 1e-4 * (1 + a));
    EXPECT_DOUBLE_EQ(loss_bft(logits, targets), a);
    // Softmax minus one-hot: rows sum to zero.
    for (int r = 0; r < n; ++r) EXPECT_NEAR(d.row(r).sum(), 0.0f, 1e-5f);
    MatrixT<float> half;
    nll_sum(logits, std::span<const TokenId>(targets), &half, 0.5);
    EXPECT_TRUE(half.isApprox(0.5f * d));
  }
}

TEST(LossLikelihood, EmptyRegionAndMismatch) {
  EXPECT_EQ(loss_bft(MatrixT<float>(0, 12), {}), 0.0);
  EXPECT_THROW(loss_bft(MatrixT<float>::Zero(2, 12), std::vector<TokenId>{1}), InvalidArgument);
  EXPECT_THROW(loss_bft(MatrixT<float>::Zero(1, 12), std::vector<TokenId>{12}), InvalidArgument);
}

TEST(LossLikelihood, TargetsAreShiftedMusicRegion) {
  ModelInput in;
  in.ids = {10, 11, 3, 4, 5, 6, 2};
  in.music_begin = 3;
  in.music_end = 7;
  const LmTargets t = lm_targets(in);
  EXPECT_EQ(t.rows.begin, 2);
  EXPECT_EQ(t.rows.end, 6);
  EXPECT_EQ(t.targets, (std::vector<TokenId>{4, 5, 6, 2}));
}

TEST(Corruption, SingleBar) {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto plan = make_corruption({17}, rng);
    EXPECT_EQ(plan.t(), 1);
    EXPECT_EQ(plan.modified, std::vector<int>{0});
    EXPECT_NE(plan.replacement[0], 17);
    EXPECT_EQ(plan.labels[0], 0);
  }
  EXPECT_THROW(make_corruption({}, rng), InvalidArgument);
}

TEST(Corruption, PlanInvariants) {
  Rng rng(4);
  std::array<int, kNumChords> replacement_hist{};
  for (int i = 0; i < 5000; ++i) {
    std::vector<int> chords(static_cast<std::size_t>(rng.uniform_range(1, 16)));
    for (auto& c : chords) c = rng.uniform_range(0, 96);
    const auto plan = make_corruption(chords, rng);
    const int b = static_cast<int>(chords.size());
    ASSERT_GE(plan.t(), 1);
    ASSERT_LE(plan.t(), (b + 1) / 2);
    EXPECT_EQ(std::set<int>(plan.modified.begin(), plan.modified.end()).size(), plan.modified.size());
    const auto changed = plan.apply(chords);
    for (int k = 0; k < b; ++k) {
      const auto u = static_cast<std::size_t>(k);
      const bool in_m = std::binary_search(plan.modified.begin(), plan.modified.end(), k);
      EXPECT_EQ(plan.labels[u] == 0, in_m);
      if (in_m) {
        EXPECT_NE(changed[u], chords[u]);
        EXPECT_GE(changed[u], 0);
        EXPECT_LT(changed[u], kNumChords);
        if (chords[u] == 0) ++replacement_hist[static_cast<std::size_t>(changed[u])];
      } else {
        EXPECT_EQ(changed[u], chords[u]);
      }
    }
  }
  EXPECT_EQ(replacement_hist[0], 0);
}

TEST(Corruption, TCountIsUniformChiSquare) {
  // b = 16: t uniform on 1..8. Critical value of chi^2 with 7 dof at p = 0.001 is 24.32.
  Rng rng(5);
  const std::vector<int> chords(16, 0);
  std::array<int, 9> counts{};
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(make_corruption(chords, rng).t())];
  EXPECT_EQ(counts[0], 0);
  double chi2 = 0;
  for (int t = 1; t <= 8; ++t) {
    const double e = draws / 8.0;
    chi2 += (counts[static_cast<std::size_t>(t)] - e) * (counts[static_cast<std::size_t>(t)] - e) / e;
  }
  EXPECT_LT(chi2, 24.32);

  // Odd b = 5: t uniform on 1..3 (ceil(5/2) = 3).
  std::array<int, 4> odd{};
  for (int i = 0; i < 3000; ++i) ++odd[static_cast<std::size_t>(make_corruption({1, 2, 3, 4, 5}, rng).t())];
  for (int t = 1; t <= 3; ++t) EXPECT_GT(odd[static_cast<std::size_t>(t)], 850);
}

TEST(LossPa, AnalyticAndOracle) {
  CorruptionPlan plan;
  plan.labels = {1, 0, 1, 1};
  plan.replacement = {-1, 5, -1, -1};
  plan.modified = {1};
  const std::vector<double> half(4, 0.5);
  EXPECT_NEAR(loss_pa(half, plan), 4 * std::log(2.0), 1e-12);
  const std::vector<double> perfect = {1.0, 0.0, 1.0, 1.0};
  EXPECT_LT(loss_pa(perfect, plan), 1e-6);
  EXPECT_GE(loss_pa(perfect, plan), 0.0);

  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> p;
    for (int i = 0; i < 4; ++i) p.push_back(rng.uniform01());
    double want = 0;
    for (int i = 0; i < 4; ++i) {
      const double q = std::min(std::max(p[static_cast<std::size_t>(i)], 1e-7), 1 - 1e-7);
      want += plan.labels[static_cast<std::size_t>(i)] == 1 ? -std::log(q) : -std::log(1 - q);
    }
    std::vector<double> d;
    EXPECT_NEAR(loss_pa(p, plan, &d), want, 1e-12);
    for (int i = 0; i < 4; ++i) {
      EXPECT_NEAR(d[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(i)] - plan.labels[static_cast<std::size_t>(i)], 1e-12);
    }
  }
  EXPECT_THROW(loss_pa(std::vector<double>{0.5}, plan), InvalidArgument);
}

TEST(Counterfactual, ReplacementRule) {
  Rng rng(7);
  const int c_maj = 0, a_min = 73;
  int seen_bar1 = 0;
  for (int i = 0; i < 200; ++i) {
    const auto p = pick_counterfactual({c_maj, a_min}, rng);
    if (p.bar == 1) {
      EXPECT_EQ(p.replacement, c_maj);
      ++seen_bar1;
    } else {
      EXPECT_NE(p.replacement, c_maj);
    }
    EXPECT_EQ(p.original, p.bar == 0 ? c_maj : a_min);
  }
  EXPECT_GT(seen_bar1, 60);

  std::set<int> repl;
  for (int i = 0; i < 400; ++i) {
    const auto p = pick_counterfactual({c_maj, c_maj}, rng);
    EXPECT_NE(p.replacement, c_maj);
    if (p.bar == 1) repl.insert(p.replacement);
  }
  EXPECT_GT(repl.size(), 40u);
}

TEST(Counterfactual, TargetBarUniformAndReplacementDiffers) {
  Rng rng(8);
  std::vector<int> chords;
  for (int i = 0; i < 8; ++i) chords.push_back(i % 3 == 0 ? 5 : 40);
  std::array<int, 8> hits{};
  for (int i = 0; i < 8000; ++i) {
    const auto p = pick_counterfactual(chords, rng);
    ++hits[static_cast<std::size_t>(p.bar)];
    EXPECT_NE(p.replacement, p.original);
    const auto k = static_cast<std::size_t>(p.bar);
    if (p.bar >= 1 && chords[k] != chords[k - 1]) EXPECT_EQ(p.replacement, chords[k - 1]);
  }
  for (int h : hits) EXPECT_NEAR(h, 1000, 150);
}

TEST(LossCf, HingeCases) {
  EXPECT_DOUBLE_EQ(loss_cf(1.0, 1.2, 0.05), 0.0);
  EXPECT_NEAR(loss_cf(1.0, 1.0, 0.05), 0.05, 1e-15);
  EXPECT_NEAR(loss_cf(1.1, 1.0, 0.05), 0.15, 1e-12);
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const double j1 = rng.uniform01() * 3, j2 = rng.uniform01() * 3;
    const double l = loss_cf(j1, j2, 0.05);
    EXPECT_GE(l, 0.0);
    EXPECT_EQ(l == 0.0, j2 - j1 >= 0.05);
  }
}

TEST(LossTotal, Combination) {
  EXPECT_DOUBLE_EQ(loss_total(3.5, 0.2, 0.0), 3.5);
  EXPECT_DOUBLE_EQ(loss_total(3.5, 0.0, 1e3), 3.5);
  EXPECT_DOUBLE_EQ(loss_total(3.5, 0.01, 1e3), 13.5);
  EXPECT_THROW(loss_total(1, 1, -1), InvalidArgument);
}

TEST(LossTotal, NonFiniteTermIsNamed) {
  EXPECT_NO_THROW(check_finite("l_bft", 1.0));
  try {
    check_finite("l_cf", std::nan(""));
    FAIL();
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("l_cf"), std::string::npos);
  }
}

TEST(Metrics, JsonLineFields) {
  StepMetrics m;
  m.step = 12;
  m.stage = "finetune";
  m.l_bft = 1.5;
  m.l_cf = 0.01;
  m.l_total = 11.5;
  m.lr = 1e-4;
  const auto j = nlohmann::json::parse(metrics_json(m));
  EXPECT_EQ(j.size(), 7u);
  EXPECT_EQ(j.at("step"), 12);
  EXPECT_EQ(j.at("stage"), "finetune");
  EXPECT_DOUBLE_EQ(j.at("l_total").get<double>(), 11.5);
  EXPECT_TRUE(j.contains("l_pa"));
}

}  // namespace
}  // namespace musebar
