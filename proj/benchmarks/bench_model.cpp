// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "musebar/losses.hpp"
#include "musebar/model.hpp"
#include "musebar/rng.hpp"

namespace {

using namespace musebar;

struct Fixture {
  Vocab vocab = build_vocab();
  ModelConfig config;
  Params params;
  ModelInput input;

  explicit Fixture(int length) {
    config.vocab_size = vocab.size();
    params = init_params<float>(config, 7);
    Rng rng(3);
    for (int t = 0; t < length; ++t) {
      input.ids.push_back(vocab.pitch(rng.uniform_range(40, 90)));
      input.seq_pos.push_back(t);
      input.bar_pos.push_back(-1);
    }
    input.music_begin = 1;
    input.music_end = length;
  }
};

void BM_Forward(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto out = forward(f.params, f.config, f.input);
    benchmark::DoNotOptimize(out.logits.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(128)->Arg(426)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  Fixture f(static_cast<int>(state.range(0)));
  const TrainableSet all = TrainableSet::everything(f.vocab.size());
  Params grads = f.params.zeros_like();
  const LmTargets t = lm_targets(f.input);
  ForwardOptions opt;
  opt.logit_rows = t.rows;
  for (auto _ : state) {
    ForwardCache<float> cache;
    auto out = forward(f.params, f.config, f.input, opt, &cache);
    MatrixT<float> d;
    nll_sum(out.logits, t.targets, &d);
    backward(f.params, f.config, cache, d, {}, all, grads);
    benchmark::DoNotOptimize(grads.lm_head.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackward)->Arg(128)->Arg(426)->Unit(benchmark::kMillisecond);

void BM_DecodeStep(benchmark::State& state) {
  Fixture f(1);
  DecodeState s(f.config);
  int t = 0;
  for (auto _ : state) {
    if (s.length() >= 512) {
      state.PauseTiming();
      s.truncate(0);
      t = 0;
      state.ResumeTiming();
    }
    auto logits = decode_step(f.params, f.config, s, f.vocab.pitch(60), t++, -1);
    benchmark::DoNotOptimize(logits.data());
  }
}
BENCHMARK(BM_DecodeStep);

}  // namespace
