// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

#include "musebar/losses.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "musebar/chords.hpp"

namespace musebar {

LmTargets lm_targets(const ModelInput& input) {
  LmTargets t;
  if (input.music_begin < 1 || input.music_end <= input.music_begin) {
    t.rows = {input.music_begin, input.music_begin};
    return t;
  }
  t.rows = {input.music_begin - 1, input.music_end - 1};
  t.targets.assign(input.ids.begin() + input.music_begin, input.ids.begin() + input.music_end);
  return t;
}

template <typename T>
double nll_sum(const MatrixT<T>& logits, std::span<const TokenId> targets, MatrixT<T>* dlogits,
               double grad_scale) {
  if (logits.rows() != static_cast<Eigen::Index>(targets.size())) {
    throw InvalidArgument("logits rows (" + std::to_string(logits.rows()) + ") do not match targets (" +
                          std::to_string(targets.size()) + ")");
  }
  if (dlogits != nullptr) dlogits->resize(logits.rows(), logits.cols());
  double total = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const TokenId y = targets[static_cast<std::size_t>(r)];
    if (y < 0 || y >= logits.cols()) throw InvalidArgument("target id out of range");
    const auto row = logits.row(r);
    const T m = row.maxCoeff();
    const double lse_d = static_cast<double>(m) + std::log((row.array() - m).exp().template cast<double>().sum());
    total += lse_d - static_cast<double>(row(y));
    const T lse = static_cast<T>(lse_d);
    if (dlogits != nullptr) {
      dlogits->row(r) = ((row.array() - lse).exp() * static_cast<T>(grad_scale)).matrix();
      (*dlogits)(r, y) -= static_cast<T>(grad_scale);
    }
  }
  return total;
}

template double nll_sum<float>(const MatrixT<float>&, std::span<const TokenId>, MatrixT<float>*, double);
template double nll_sum<double>(const MatrixT<double>&, std::span<const TokenId>, MatrixT<double>*, double);

double loss_pretrain(const MatrixT<float>& logits, std::span<const TokenId> targets, MatrixT<float>* dlogits) {
  return nll_sum(logits, targets, dlogits);
}

double loss_bft(const MatrixT<float>& logits, std::span<const TokenId> targets, MatrixT<float>* dlogits) {
  return nll_sum(logits, targets, dlogits);
}

namespace {

int other_chord(int original, Rng& rng) {
  const int r = static_cast<int>(rng.uniform_int(kNumChords - 1));
  return r >= original ? r + 1 : r;
}

}  // namespace

std::vector<int> CorruptionPlan::apply(const std::vector<int>& chords) const {
  if (chords.size() != replacement.size()) throw InvalidArgument("corruption plan size mismatch");
  std::vector<int> out = chords;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (replacement[i] >= 0) out[i] = replacement[i];
  }
  return out;
}

CorruptionPlan make_corruption(const std::vector<int>& chords, Rng& rng) {
  const int b = static_cast<int>(chords.size());
  if (b < 1) throw InvalidArgument("corruption needs at least one bar");
  CorruptionPlan plan;
  const int t = rng.uniform_range(1, (b + 1) / 2);
  // Partial Fisher-Yates: the first t entries are a uniform t-subset.
  std::vector<int> order(static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) order[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < t; ++i) {
    const int j = i + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(b - i)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  plan.modified.assign(order.begin(), order.begin() + t);
  std::sort(plan.modified.begin(), plan.modified.end());
  plan.replacement.assign(static_cast<std::size_t>(b), -1);
  plan.labels.assign(static_cast<std::size_t>(b), 1);
  for (int i : plan.modified) {
    const auto k = static_cast<std::size_t>(i);
    plan.replacement[k] = other_chord(chords[k], rng);
    plan.labels[k] = 0;
  }
  return plan;
}

double loss_pa(std::span<const double> probs, const CorruptionPlan& plan, std::vector<double>* dlogits) {
  if (probs.size() != plan.labels.size()) throw InvalidArgument("one match probability per bar is required");
  if (dlogits != nullptr) dlogits->assign(probs.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kProbClamp, 1.0 - kProbClamp);
    const int s = plan.labels[i];
    total -= s == 1 ? std::log(p) : std::log(1.0 - p);
    // d/dz of the cross-entropy is p - s; it vanishes where the clamp binds.
    if (dlogits != nullptr && p == probs[i]) (*dlogits)[i] = probs[i] - s;
  }
  return total;
}

CounterfactualPair pick_counterfactual(const std::vector<int>& chords, Rng& rng) {
  const int b = static_cast<int>(chords.size());
  if (b < 1) throw InvalidArgument("counterfactual needs at least one bar");
  CounterfactualPair pair;
  pair.bar = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(b)));
  const auto i = static_cast<std::size_t>(pair.bar);
  pair.original = chords[i];
  if (pair.bar >= 1 && chords[i] != chords[i - 1]) {
    pair.replacement = chords[i - 1];
  } else {
    pair.replacement = other_chord(pair.original, rng);
  }
  return pair;
}

double loss_cf(double j1, double j2, double eta) { return std::max(0.0, eta - (j2 - j1)); }

double loss_total(double l_bft, double l_cf, double lambda) {
  if (lambda < 0.0) throw InvalidArgument("lambda must be non-negative");
  return l_bft + lambda * l_cf;
}

void check_finite(const char* term, double value) {
  if (!std::isfinite(value)) throw NonFiniteError(term, value);
}

std::string metrics_json(const StepMetrics& m) {
  nlohmann::ordered_json j;
  j["step"] = m.step;
  j["stage"] = m.stage;
  j["l_bft"] = m.l_bft;
  j["l_pa"] = m.l_pa;
  j["l_cf"] = m.l_cf;
  j["l_total"] = m.l_total;
  j["lr"] = m.lr;
  return j.dump();
}

}  // namespace musebar
