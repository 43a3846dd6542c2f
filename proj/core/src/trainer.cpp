// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

#include "musebar/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace musebar {

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::kBase: return "base";
    case Stage::kPreAdaptation: return "pa";
    case Stage::kFineTune: return "finetune";
  }
  return "base";
}

Stage stage_from_name(const std::string& name) {
  if (name == "base") return Stage::kBase;
  if (name == "pa") return Stage::kPreAdaptation;
  if (name == "finetune") return Stage::kFineTune;
  throw InvalidArgument("unknown stage '" + name + "' (expected base, pa or finetune)");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw InvalidArgument("epochs must be non-negative");
  if (batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
  if (!(peak_lr > 0.0)) throw InvalidArgument("peak_lr must be positive");
  if (warmup_steps < 1) throw InvalidArgument("warmup_steps must be at least 1");
  if (lambda < 0.0) throw InvalidArgument("lambda must be non-negative");
  if (!(eta > 0.0)) throw InvalidArgument("eta must be positive");
  if (!(grad_clip > 0.0)) throw InvalidArgument("grad_clip must be positive");
}

double lr_schedule(long step, double peak_lr, int warmup) {
  if (step < 1) throw InvalidArgument("lr_schedule step must be at least 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup);
  return peak_lr * std::min(s / w, std::sqrt(w / s));
}

TrainableSet trainable_for(Stage stage, const Vocab& vocab) {
  switch (stage) {
    case Stage::kBase: return TrainableSet::for_base();
    case Stage::kPreAdaptation: return TrainableSet::for_adaptation(vocab, true);
    case Stage::kFineTune: return TrainableSet::for_adaptation(vocab, false);
  }
  return TrainableSet::for_base();
}

OptimizerState make_optimizer(const Params& params) {
  OptimizerState s;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  return s;
}

double grad_norm(const Params& grads) {
  double sq = 0.0;
  grads.visit([&sq](const std::string&, const MatrixT<float>& g, ParamGroup) {
    sq += g.template cast<double>().squaredNorm();
  });
  return std::sqrt(sq);
}

void adam_step(Params& params, const Params& grads, OptimizerState& state, const TrainableSet& trainable,
               double lr, const TrainConfig& config) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  const auto b1 = static_cast<float>(config.beta1);
  const auto b2 = static_cast<float>(config.beta2);
  const auto step_size = static_cast<float>(lr / bc1);
  const auto inv_bc2 = static_cast<float>(1.0 / bc2);
  const auto eps = static_cast<float>(config.adam_eps);

  std::vector<MatrixT<float>*> p, m, v;
  std::vector<const MatrixT<float>*> g;
  std::vector<ParamGroup> groups;
  params.visit([&](const std::string&, MatrixT<float>& x, ParamGroup grp) {
    p.push_back(&x);
    groups.push_back(grp);
  });
  state.m.visit([&](const std::string&, MatrixT<float>& x, ParamGroup) { m.push_back(&x); });
  state.v.visit([&](const std::string&, MatrixT<float>& x, ParamGroup) { v.push_back(&x); });
  grads.visit([&](const std::string&, const MatrixT<float>& x, ParamGroup) { g.push_back(&x); });

  auto update = [&](auto pr, auto mr, auto vr, auto gr) {
    mr = b1 * mr + (1.0f - b1) * gr;
    vr = b2 * vr + (1.0f - b2) * gr.square();
    pr -= step_size * mr / ((vr * inv_bc2).sqrt() + eps);
  };
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!trainable.includes(groups[i])) continue;
    if (groups[i] == ParamGroup::kTokenEmbedding && !trainable.all_token_rows) {
      for (Eigen::Index r = 0; r < p[i]->rows(); ++r) {
        if (!trainable.token_row(static_cast<int>(r))) continue;
        update(p[i]->row(r).array(), m[i]->row(r).array(), v[i]->row(r).array(), g[i]->row(r).array());
      }
    } else {
      update(p[i]->array(), m[i]->array(), v[i]->array(), g[i]->array());
    }
  }
}

ModelInput base_input(const Example& example, const Vocab& vocab) {
  return assemble_input(build_global_prompt(example.record.global, vocab), example.music, PromptMode::kGeneration,
                        vocab, true);
}

ModelInput finetune_input(const Example& example, const std::vector<int>& chords, const Vocab& vocab) {
  return assemble_input(build_prompt(example.record.global, chords, vocab), example.music, PromptMode::kGeneration,
                        vocab, true);
}

ModelInput pa_input(const Example& example, const std::vector<int>& chords, const Vocab& vocab) {
  return assemble_input(build_prompt(example.record.global, chords, vocab), example.music,
                        PromptMode::kPreAdaptation, vocab, true);
}

namespace {

// Keeps positions [0, length); later positions cannot affect earlier logits.
void truncate_input(ModelInput& input, int length) {
  if (length >= input.length()) return;
  input.ids.resize(static_cast<std::size_t>(length));
  input.seq_pos.resize(static_cast<std::size_t>(length));
  input.bar_pos.resize(static_cast<std::size_t>(length));
  input.music_end = std::min(input.music_end, length);
  std::erase_if(input.bar_spans, [length](const auto& s) { return s.first >= length; });
  for (auto& s : input.bar_spans) s.second = std::min(s.second, length);
}

// Logit rows (relative to the LmTargets range) and targets of bar `bar`.
std::pair<int, int> bar_rows(const ModelInput& input, int bar) {
  const auto [s, e] = input.bar_spans.at(static_cast<std::size_t>(bar));
  return {s - input.music_begin, e - input.music_begin};
}

}  // namespace

double bar_mean_nll(const ModelInput& input, const MatrixT<float>& logits, int bar) {
  const auto t = lm_targets(input);
  const auto [r0, r1] = bar_rows(input, bar);
  if (r1 <= r0) return 0.0;
  const MatrixT<float> rows = logits.middleRows(r0, r1 - r0);
  return nll_sum(rows, std::span<const TokenId>(t.targets).subspan(static_cast<std::size_t>(r0),
                                                                   static_cast<std::size_t>(r1 - r0))) /
         (r1 - r0);
}

SampleLoss sample_step(const Params& params, const ModelConfig& model, const Vocab& vocab, const Example& example,
                       const TrainConfig& config, Rng& rng, double grad_scale, Params* grads) {
  SampleLoss out;
  const TrainableSet trainable = trainable_for(config.stage, vocab);
  ForwardCache<float> cache;
  ForwardCache<float>* cache_ptr = grads != nullptr ? &cache : nullptr;

  if (config.stage == Stage::kPreAdaptation) {
    const CorruptionPlan plan = make_corruption(example.record.chords, rng);
    const ModelInput in = pa_input(example, plan.apply(example.record.chords), vocab);
    ForwardOptions opt;
    opt.compute_logits = false;
    opt.compute_match = true;
    const auto fwd = forward(params, model, in, opt, cache_ptr);
    const std::vector<double> probs(fwd.match_probs.begin(), fwd.match_probs.end());
    std::vector<double> dz;
    out.l_pa = loss_pa(probs, plan, &dz);
    out.l_total = out.l_pa;
    check_finite("l_pa", out.l_pa);
    if (grads != nullptr) {
      std::vector<float> dmatch(dz.size());
      for (std::size_t i = 0; i < dz.size(); ++i) dmatch[i] = static_cast<float>(dz[i] * grad_scale);
      backward(params, model, cache, MatrixT<float>(), dmatch, trainable, *grads);
    }
    return out;
  }

  const bool base = config.stage == Stage::kBase;
  const ModelInput in = base ? base_input(example, vocab) : finetune_input(example, example.record.chords, vocab);
  const LmTargets targets = lm_targets(in);
  ForwardOptions opt;
  opt.use_adapters = !base;
  opt.logit_rows = targets.rows;
  const auto fwd = forward(params, model, in, opt, cache_ptr);
  MatrixT<float> dlogits;
  out.l_main = nll_sum(fwd.logits, targets.targets, grads != nullptr ? &dlogits : nullptr, grad_scale);
  check_finite(base ? "l_pretrain" : "l_bft", out.l_main);
  out.l_total = out.l_main;

  if (!base && config.lambda > 0.0) {
    out.cf = pick_counterfactual(example.record.chords, rng);
    std::vector<int> changed = example.record.chords;
    changed[static_cast<std::size_t>(out.cf.bar)] = out.cf.replacement;
    ModelInput in2 = finetune_input(example, changed, vocab);
    const auto [r0, r1] = bar_rows(in, out.cf.bar);
    truncate_input(in2, targets.rows.begin + r1);
    const int n = r1 - r0;
    const auto bar_targets = std::span<const TokenId>(targets.targets).subspan(static_cast<std::size_t>(r0),
                                                                               static_cast<std::size_t>(n));
    out.cf.j1 = nll_sum(MatrixT<float>(fwd.logits.middleRows(r0, n)), bar_targets) / n;
    ForwardOptions opt2 = opt;
    opt2.logit_rows = {targets.rows.begin + r0, targets.rows.begin + r1};
    ForwardCache<float> cache2;
    const auto fwd2 = forward(params, model, in2, opt2, grads != nullptr ? &cache2 : nullptr);
    MatrixT<float> d2;
    out.cf.j2 = nll_sum(fwd2.logits, bar_targets, grads != nullptr ? &d2 : nullptr, 1.0) / n;
    out.l_cf = loss_cf(out.cf.j1, out.cf.j2, config.eta);
    check_finite("l_cf", out.l_cf);
    out.l_total = loss_total(out.l_main, out.l_cf, config.lambda);
    if (grads != nullptr && out.l_cf > 0.0) {
      // Active hinge: d/dJ1 = +lambda, d/dJ2 = -lambda.
      const double w = config.lambda * grad_scale / n;
      MatrixT<float> d1;
      nll_sum(MatrixT<float>(fwd.logits.middleRows(r0, n)), bar_targets, &d1, w);
      dlogits.middleRows(r0, n) += d1;
      d2 *= static_cast<float>(-w);
      backward(params, model, cache2, d2, {}, trainable, *grads);
    }
  }
  check_finite("l_total", out.l_total);
  if (grads != nullptr) backward(params, model, cache, dlogits, {}, trainable, *grads);
  return out;
}

double pa_accuracy(const Params& params, const ModelConfig& model, const Vocab& vocab,
                   const std::vector<Example>& examples, std::uint64_t seed) {
  long correct = 0, total = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    Rng rng = Rng(seed).fork(i);
    const auto& e = examples[i];
    const CorruptionPlan plan = make_corruption(e.record.chords, rng);
    ForwardOptions opt;
    opt.compute_logits = false;
    opt.compute_match = true;
    const auto fwd = forward(params, model, pa_input(e, plan.apply(e.record.chords), vocab), opt);
    for (std::size_t b = 0; b < fwd.match_probs.size(); ++b) {
      const int predicted = fwd.match_probs[b] > 0.5f ? 1 : 0;
      correct += predicted == plan.labels[b] ? 1 : 0;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

TrainResult run_stage(const TrainConfig& config, const ModelConfig& model, const Vocab& vocab,
                      const std::vector<Example>& train, const std::vector<Example>& held_out, Params& params,
                      const StepCallback& on_step, const EpochCallback& on_epoch) {
  namespace fs = std::filesystem;
  config.validate();
  model.validate();
  if (train.empty()) throw InvalidArgument("training set is empty");
  const TrainableSet trainable = trainable_for(config.stage, vocab);
  const std::string name = stage_name(config.stage);
  OptimizerState opt = make_optimizer(params);
  Params grads = params.zeros_like();
  TrainResult result;

  std::ofstream metrics;
  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    metrics.open((fs::path(config.out_dir) / "metrics.jsonl").string(), std::ios::app);
    if (!metrics) throw Error("cannot open metrics log in " + config.out_dir);
  }

  const Rng root(config.seed);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng order_rng = root.fork(static_cast<std::uint64_t>(epoch));
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.uniform_int(i)]);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const double scale = 1.0 / static_cast<double>(end - start);
      grads.visit([](const std::string&, MatrixT<float>& g, ParamGroup) { g.setZero(); });
      StepMetrics m;
      m.stage = name;
      for (std::size_t j = start; j < end; ++j) {
        Rng rng = root.fork((static_cast<std::uint64_t>(epoch) << 32) ^ (order[j] + 1));
        const SampleLoss s = sample_step(params, model, vocab, train[order[j]], config, rng, scale, &grads);
        m.l_bft += s.l_main * scale;
        m.l_pa += s.l_pa * scale;
        m.l_cf += s.l_cf * scale;
        m.l_total += s.l_total * scale;
      }
      const double norm = grad_norm(grads);
      check_finite("gradient norm", norm);
      if (norm > config.grad_clip) {
        const auto f = static_cast<float>(config.grad_clip / norm);
        grads.visit([f](const std::string&, MatrixT<float>& g, ParamGroup) { g *= f; });
      }
      m.step = opt.step + 1;
      m.lr = lr_schedule(m.step, config.peak_lr, config.warmup_steps);
      adam_step(params, grads, opt, trainable, m.lr, config);
      epoch_loss += m.l_total * static_cast<double>(end - start);
      result.steps.push_back(m);
      if (metrics.is_open()) metrics << metrics_json(m) << '\n';
      if (on_step) on_step(m);
    }
    if (!params.all_finite()) throw NonFiniteError("parameters", std::nan(""));

    EpochSummary summary;
    summary.epoch = epoch;
    summary.mean_loss = epoch_loss / static_cast<double>(train.size());
    if (config.stage == Stage::kPreAdaptation && !held_out.empty()) {
      summary.pa_accuracy = pa_accuracy(params, model, vocab, held_out, config.seed ^ 0x5eed);
    }
    summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!config.out_dir.empty()) {
      const std::string path =
          (fs::path(config.out_dir) / ("stage-" + name + "-epoch-" + std::to_string(epoch) + ".mbck")).string();
      save_checkpoint(params, model, path);
      result.checkpoints.push_back(path);
    }
    result.epochs.push_back(summary);
    if (on_epoch) on_epoch(summary);
  }
  if (metrics.is_open()) metrics.flush();
  return result;
}

}  // namespace musebar
