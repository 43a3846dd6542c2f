// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

// Controllability metrics and the clip/split protocol.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "musebar/decoder.hpp"
#include "musebar/midi_io.hpp"
#include "musebar/rng.hpp"

namespace musebar {

struct KBreakdown {
  int k = 0;
  double chord_accuracy = 0.0;
  int n_bars = 0;
  double mean_attempts = 0.0;
  double seconds = 0.0;
};

struct EvalReport {
  double chord_accuracy = 0.0;
  std::array<double, kNumGlobalAttributes> global_accuracy{};
  double average_global_accuracy = 0.0;
  int n_bars = 0;
  int n_clips = 0;
  std::vector<KBreakdown> per_k;

  std::string to_json() const;
  // Aligned two-column table.
  std::string to_table() const;
};

// Fraction of requested bars whose extracted chord equals the request;
// bars missing from a truncated result count as misses. Recomputed from the
// result tokens, not from the per-bar flags.
double chord_accuracy(const std::vector<GenerationResult>& results, const std::vector<GenerationRequest>& requests,
                      const Vocab& vocab);

struct GlobalAccuracy {
  std::array<double, kNumGlobalAttributes> per_attribute{};
  double average = 0.0;
};

// Per attribute, the fraction of clips whose rendered output carries the
// prompted bucket; NA prompts always count as matched.
GlobalAccuracy global_attribute_accuracy(const std::vector<GenerationResult>& results,
                                         const std::vector<GenerationRequest>& requests, const Vocab& vocab);

// Score-level variants used when evaluating files on disk.
int count_matched_bars(const Score& score, const std::vector<int>& targets);
std::array<bool, kNumGlobalAttributes> global_matches(const Score& score, const GlobalAttributes& prompted);

EvalReport make_report(const std::vector<GenerationResult>& results, const std::vector<GenerationRequest>& requests,
                       const Vocab& vocab);

struct Splits {
  std::vector<int> train, valid, test;  // song ids, ascending
};

// Deterministic song-level partition; sizes are rounded from the ratios and
// the test split takes the remainder.
Splits make_splits(const std::vector<int>& song_ids, const std::array<double, 3>& ratios = {0.8, 0.1, 0.1},
                   std::uint64_t seed = 0);

struct Clip {
  Score score;
  int bar_offset = 0;
};

// Bars [first, first + count) of `score`, shifted to start at tick 0, with the
// tempo and time signature in force at the first bar.
Score slice_bars(const Score& score, const std::vector<BarWindow>& bars, int first, int count);

// Up to `clips_per_song` windows of `clip_bars` bars with distinct start bars,
// in ascending start order.
std::vector<Clip> extract_clips(const Score& score, int clips_per_song, int clip_bars, Rng& rng,
                                Warnings* warnings = nullptr);

}  // namespace musebar
