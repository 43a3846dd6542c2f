// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

// Tokenized clip datasets built from a directory of songs.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "musebar/attributes.hpp"
#include "musebar/eval.hpp"

namespace musebar {

struct Example {
  ClipRecord record;
  TokenSequence music;
  int song = 0;
};

struct DatasetConfig {
  int clips_per_song = 3;
  int clip_bars = 16;
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
  std::uint64_t seed = 1;
};

struct Dataset {
  std::vector<Example> train, valid, test;
  Splits splits;
  std::size_t size() const { return train.size() + valid.size() + test.size(); }
};

// Clips of one song, labelled with the extractors and tokenized.
std::vector<Example> clips_from_song(const Score& song, int song_id, const std::string& source,
                                     const DatasetConfig& config, const Vocab& vocab, Warnings* warnings = nullptr);

Dataset build_dataset(const std::vector<Score>& songs, const std::vector<std::string>& sources,
                      const DatasetConfig& config, const Vocab& vocab, Warnings* warnings = nullptr);

// Reads every *.mid under `dir` in name order; song ids follow that order.
Dataset build_dataset_from_dir(const std::string& dir, const DatasetConfig& config, const Vocab& vocab,
                               Warnings* warnings = nullptr);

// train.jsonl / valid.jsonl / test.jsonl, one clip record per line with
// `song` and `tokens` added.
void save_dataset(const Dataset& dataset, const std::string& dir);
Dataset load_dataset(const std::string& dir, const Vocab& vocab);

std::string example_to_json(const Example& example);
Example example_from_json(const std::string& line, const Vocab& vocab);

}  // namespace musebar
