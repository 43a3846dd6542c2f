// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "musebar/attributes.hpp"
#include "musebar/synth.hpp"
#include "musebar/tokenizer.hpp"

namespace {

using namespace musebar;

void BM_GenCorpus(benchmark::State& state) {
  SynthConfig c = SynthConfig::defaults();
  c.n_songs = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto songs = gen_corpus(c);
    benchmark::DoNotOptimize(songs.data());
  }
}
BENCHMARK(BM_GenCorpus)->Arg(10);

void BM_EncodeDecode(benchmark::State& state) {
  SynthConfig c = SynthConfig::defaults();
  c.n_songs = 1;
  const Score s = gen_corpus(c).front().score;
  const Vocab v = build_vocab();
  for (auto _ : state) {
    auto back = decode(encode(s, v), v);
    benchmark::DoNotOptimize(back.notes.data());
  }
}
BENCHMARK(BM_EncodeDecode);

void BM_ExtractBarChords(benchmark::State& state) {
  SynthConfig c = SynthConfig::defaults();
  c.n_songs = 1;
  const Score s = gen_corpus(c).front().score;
  for (auto _ : state) {
    auto ids = extract_bar_chord_ids(s);
    benchmark::DoNotOptimize(ids.data());
  }
}
BENCHMARK(BM_ExtractBarChords);

}  // namespace
