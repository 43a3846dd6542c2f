// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

// Clip-level (global) and bar-level attributes, and the token layouts that
// put them in front of (or behind) the music.

#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "musebar/chords.hpp"
#include "musebar/midi_io.hpp"
#include "musebar/tokenizer.hpp"

namespace musebar {

struct GlobalAttributes {
  // Field order matches kGlobalAttributeNames; the largest value is NA.
  int instrument = 2;
  int pitch_range = 12;
  int rhythm_intensity = 3;
  int bar_bucket = 4;
  int time_signature = 7;
  int key = 2;
  int tempo_bucket = 3;
  int time_bucket = 5;

  static GlobalAttributes all_na() { return {}; }
  std::array<int, kNumGlobalAttributes> values() const;
  static GlobalAttributes from_values(const std::array<int, kNumGlobalAttributes>& v);
  friend bool operator==(const GlobalAttributes&, const GlobalAttributes&) = default;
};

inline int na_value(int attribute) {
  return kGlobalAttributeSizes[static_cast<std::size_t>(attribute)] - 1;
}

struct AttributeThresholds {
  double rhythm_moderate = 4.0;   // notes per bar
  double rhythm_intense = 12.0;
  double tempo_slow_max = 76.0;   // BPM, inclusive
  double tempo_fast_min = 120.0;  // BPM, inclusive
};

GlobalAttributes extract_global(const Score& clip, const AttributeThresholds& t = {});
std::vector<ChordLabel> extract_bar_chords(const Score& clip);
std::vector<int> extract_bar_chord_ids(const Score& clip);
// Per-bar estimates with scores, in bar order.
std::vector<ChordEstimate> estimate_bar_chords(const Score& clip);
// `bar_index,chord_id,chord_name,coverage_score` with a header line.
std::string bar_chords_csv(const Score& clip);

// 0 = major, 1 = minor, 2 = NA (silent input). Correlation of the
// duration-weighted pitch-class profile with the 24 rotated Krumhansl-Kessler
// key profiles.
int detect_key_mode(const Score& clip);

// Bucket helpers, exposed for tests and for labelling generated output.
int bar_count_bucket(int bars);
int time_signature_code(TimeSignature sig);
int tempo_bucket(double bpm, const AttributeThresholds& t = {});
int seconds_bucket(double seconds);
double score_seconds(const Score& score, Tick end);

enum class PromptMode { kGeneration, kPreAdaptation };

struct PromptSequence {
  std::vector<TokenId> global_tokens;
  std::vector<std::vector<TokenId>> bar_tokens;  // one chord token per bar
  std::vector<int> bar_positions;                // per bar-level token
  TokenId sep = 3;

  int num_bars() const { return static_cast<int>(bar_tokens.size()); }
  friend bool operator==(const PromptSequence&, const PromptSequence&) = default;
};

// A fully laid-out model input: token ids plus the two position streams.
// seq_pos is -1 for prompt tokens; bar_pos is -1 for everything except
// bar-level prompt tokens.
struct ModelInput {
  std::vector<TokenId> ids;
  std::vector<int> seq_pos;
  std::vector<int> bar_pos;
  std::vector<int> bar_prompt_index;  // sequence index of each bar's prompt token
  int music_begin = 0;                // [music_begin, music_end) holds music + EOS
  int music_end = 0;
  std::vector<std::pair<int, int>> bar_spans;  // absolute [start, end) per bar

  int length() const { return static_cast<int>(ids.size()); }
};

PromptSequence build_prompt(const GlobalAttributes& g, const std::vector<int>& bar_chords,
                            const Vocab& vocab);
PromptSequence build_prompt(const GlobalAttributes& g, const std::vector<ChordLabel>& bars,
                            const Vocab& vocab);
// Prompt without bar-level tokens, for foundation pretraining.
PromptSequence build_global_prompt(const GlobalAttributes& g, const Vocab& vocab);

// Generation mode: X_g, X_1..X_b, [SEP], music (+EOS).
// Pre-adaptation mode: music, [SEP], X_g, X_1..X_b; music tokens keep the
// same sequential positions in both modes (music token j sits at j + 1).
ModelInput assemble_input(const PromptSequence& prompt, const TokenSequence& music, PromptMode mode,
                          const Vocab& vocab, bool append_eos);

// On-disk dataset unit.
struct ClipRecord {
  GlobalAttributes global;
  std::vector<int> chords;
  std::string source;
  int bar_offset = 0;
  friend bool operator==(const ClipRecord&, const ClipRecord&) = default;
};

std::string clip_record_to_json(const ClipRecord& record);
ClipRecord clip_record_from_json(std::string_view text);

}  // namespace musebar
