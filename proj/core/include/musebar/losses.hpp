// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

// Training objectives: music likelihood, prompt/music match classification
// on corrupted prompts, and the counterfactual hinge on bar-level prompts.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "musebar/model.hpp"
#include "musebar/rng.hpp"

namespace musebar {

// Logit rows and next-token targets for the music + EOS region of `input`:
// row r of the logits (sequence position rows.begin + r) predicts targets[r].
struct LmTargets {
  RowRange rows;
  std::vector<TokenId> targets;
};
LmTargets lm_targets(const ModelInput& input);

// Summed negative log-likelihood of `targets` under row-wise softmax of
// `logits`. When `dlogits` is given it receives d(sum)/d(logits) scaled by
// `grad_scale`. Throws InvalidArgument on a row/target count mismatch.
template <typename T>
double nll_sum(const MatrixT<T>& logits, std::span<const TokenId> targets, MatrixT<T>* dlogits = nullptr,
               double grad_scale = 1.0);

// Foundation objective (global prompt only) and bar-level fine-tuning
// objective; numerically the same sum, different conditioning.
double loss_pretrain(const MatrixT<float>& logits, std::span<const TokenId> targets,
                     MatrixT<float>* dlogits = nullptr);
double loss_bft(const MatrixT<float>& logits, std::span<const TokenId> targets,
                MatrixT<float>* dlogits = nullptr);

struct CorruptionPlan {
  std::vector<int> modified;     // sorted bar indices
  std::vector<int> replacement;  // per bar; -1 when unmodified
  std::vector<int> labels;       // per bar; 1 = match, 0 = modified
  int t() const { return static_cast<int>(modified.size()); }
  std::vector<int> apply(const std::vector<int>& chords) const;
};

// t uniform in 1..ceil(b/2), t distinct bars, each replaced by one of the
// other 96 chord ids.
CorruptionPlan make_corruption(const std::vector<int>& chords, Rng& rng);

inline constexpr double kProbClamp = 1e-7;

// Binary cross-entropy of per-bar match probabilities against the plan's
// labels. `dlogits` (optional) receives d(loss)/d(match logit).
double loss_pa(std::span<const double> probs, const CorruptionPlan& plan, std::vector<double>* dlogits = nullptr);

struct CounterfactualPair {
  int bar = 0;
  int original = 0;
  int replacement = 0;
  double j1 = 0.0;
  double j2 = 0.0;
};

CounterfactualPair pick_counterfactual(const std::vector<int>& chords, Rng& rng);

double loss_cf(double j1, double j2, double eta);
double loss_total(double l_bft, double l_cf, double lambda);

// Throws NonFiniteError naming `term` when `value` is NaN or infinite.
void check_finite(const char* term, double value);

struct StepMetrics {
  long step = 0;
  std::string stage;
  double l_bft = 0.0;
  double l_pa = 0.0;
  double l_cf = 0.0;
  double l_total = 0.0;
  double lr = 0.0;
};
std::string metrics_json(const StepMetrics& m);

}  // namespace musebar
