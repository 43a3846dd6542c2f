// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

// Three training stages: foundation pretraining on global prompts,
// pre-adaptation on corrupted bar prompts, and bar-level fine-tuning with the
// counterfactual hinge.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "musebar/dataset.hpp"
#include "musebar/losses.hpp"
#include "musebar/model.hpp"

namespace musebar {

enum class Stage { kBase, kPreAdaptation, kFineTune };

std::string stage_name(Stage stage);
Stage stage_from_name(const std::string& name);

struct TrainConfig {
  Stage stage = Stage::kBase;
  int epochs = 1;
  int batch_size = 8;
  double peak_lr = 2e-4;
  int warmup_steps = 200;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double lambda = 1e3;
  double eta = 0.05;
  double grad_clip = 1.0;
  std::uint64_t seed = 1;
  // Checkpoints and metrics.jsonl go here when non-empty.
  std::string out_dir;

  void validate() const;
};

double lr_schedule(long step, double peak_lr, int warmup);

TrainableSet trainable_for(Stage stage, const Vocab& vocab);

struct OptimizerState {
  Params m, v;
  long step = 0;
};

OptimizerState make_optimizer(const Params& params);

// Global L2 norm over every tensor of `grads`.
double grad_norm(const Params& grads);

// One Adam update of the trainable tensors (rows, for partial token tables).
void adam_step(Params& params, const Params& grads, OptimizerState& state, const TrainableSet& trainable,
               double lr, const TrainConfig& config);

// Per-sample losses and accumulated gradients.
struct SampleLoss {
  double l_main = 0.0;  // pretraining or fine-tuning likelihood term
  double l_pa = 0.0;
  double l_cf = 0.0;
  double l_total = 0.0;
  CounterfactualPair cf;
};

// Inputs used by each stage; exposed for tests.
ModelInput base_input(const Example& example, const Vocab& vocab);
ModelInput finetune_input(const Example& example, const std::vector<int>& chords, const Vocab& vocab);
ModelInput pa_input(const Example& example, const std::vector<int>& chords, const Vocab& vocab);

// Mean NLL over the music tokens of bar `bar` (its Bar token included) given
// logits covering the whole LmTargets range.
double bar_mean_nll(const ModelInput& input, const MatrixT<float>& logits, int bar);

// Loss and gradient of one example; `grad_scale` multiplies every gradient.
SampleLoss sample_step(const Params& params, const ModelConfig& model, const Vocab& vocab, const Example& example,
                       const TrainConfig& config, Rng& rng, double grad_scale, Params* grads);

struct EpochSummary {
  int epoch = 0;
  double mean_loss = 0.0;
  double pa_accuracy = -1.0;  // held-out, pa stage only
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<StepMetrics> steps;
  std::vector<EpochSummary> epochs;
  std::vector<std::string> checkpoints;
};

using StepCallback = std::function<void(const StepMetrics&)>;
using EpochCallback = std::function<void(const EpochSummary&)>;

// Trains `params` in place. Throws NonFiniteError on a non-finite loss or
// update; checkpoints written so far are kept.
TrainResult run_stage(const TrainConfig& config, const ModelConfig& model, const Vocab& vocab,
                      const std::vector<Example>& train, const std::vector<Example>& held_out, Params& params,
                      const StepCallback& on_step = {}, const EpochCallback& on_epoch = {});

// Fraction of bars whose match probability falls on the right side of 0.5,
// over corruption plans drawn from `seed`.
double pa_accuracy(const Params& params, const ModelConfig& model, const Vocab& vocab,
                   const std::vector<Example>& examples, std::uint64_t seed);

}  // namespace musebar
