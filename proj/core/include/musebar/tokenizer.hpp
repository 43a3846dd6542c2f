// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

// REMI-style event tokens. Each bar is a Bar token followed, per note in
// (onset, pitch) order, by Position, Pitch, Duration and Velocity tokens on a
// grid of four steps per quarter note.

#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "musebar/midi_io.hpp"

namespace musebar {

using TokenId = int;

enum class TokenFamily { kSpecial, kBar, kPosition, kPitch, kDuration, kVelocity, kGlobal, kChord };

inline constexpr int kStepsPerQuarter = 4;
inline constexpr int kNumPositions = 64;
inline constexpr int kMaxDurationSteps = 64;
inline constexpr int kNumVelocityBins = 32;
inline constexpr int kVelocityBinWidth = 4;

// Global attribute families in attribute-table order, with value counts
// (the last value of each is NA).
inline constexpr int kNumGlobalAttributes = 8;
inline constexpr std::array<int, kNumGlobalAttributes> kGlobalAttributeSizes = {3, 13, 4, 5, 8, 3, 4, 6};
inline constexpr std::array<std::string_view, kNumGlobalAttributes> kGlobalAttributeNames = {
    "Instrument", "PitchRange", "Rhythm", "BarCount", "TimeSig", "Key", "Tempo", "Time"};

class Vocab {
 public:
  int size() const { return static_cast<int>(names_.size()); }
  int max_bars() const { return max_bars_; }

  const std::string& name(TokenId id) const;
  // Throws InvalidArgument for unknown names.
  TokenId id(std::string_view name) const;
  bool contains(TokenId id) const { return id >= 0 && id < size(); }

  TokenFamily family(TokenId id) const;
  // Index of `id` within its family (pitch number, duration steps, ...).
  int value(TokenId id) const;

  TokenId pad() const { return 0; }
  TokenId bos() const { return 1; }
  TokenId eos() const { return 2; }
  TokenId sep() const { return 3; }
  TokenId bar() const { return bar_; }
  TokenId position(int p) const { return position_ + p; }
  TokenId pitch(int k) const { return pitch_ + k; }
  TokenId duration(int steps) const { return duration_ + steps - 1; }
  TokenId velocity_bin(int bin) const { return velocity_ + bin; }
  TokenId global(int attribute, int value) const;
  TokenId chord(int chord_id) const { return chord_ + chord_id; }

  // Bar, Position, Pitch, Duration, Velocity or EOS.
  bool is_music_token(TokenId id) const;
  bool is_prompt_token(TokenId id) const;

  // `id<TAB>name` per line.
  void dump(std::ostream& out) const;

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.names_ == b.names_ && a.max_bars_ == b.max_bars_;
  }

 private:
  friend Vocab build_vocab(int max_bars);

  std::vector<std::string> names_;
  std::vector<std::pair<TokenFamily, int>> kinds_;
  std::unordered_map<std::string, TokenId> index_;
  int max_bars_ = 0;
  TokenId bar_ = 0, position_ = 0, pitch_ = 0, duration_ = 0, velocity_ = 0, chord_ = 0;
  std::array<TokenId, kNumGlobalAttributes> global_{};
};

Vocab build_vocab(int max_bars = 32);

struct TokenSequence {
  std::vector<TokenId> ids;
  // Half-open [start, end) index ranges, one per bar; each starts at a Bar.
  std::vector<std::pair<int, int>> bar_spans;

  int num_bars() const { return static_cast<int>(bar_spans.size()); }
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

// Recomputes bar spans from the Bar tokens in `ids` (stops at EOS).
TokenSequence make_token_sequence(std::vector<TokenId> ids, const Vocab& vocab);

TokenSequence encode(const Score& score, const Vocab& vocab, Warnings* warnings = nullptr);

// Notes are rebuilt on a single time signature; tempo defaults to 120 BPM.
// Throws InvalidArgument on ids outside the vocabulary or non-music tokens.
Score decode(const TokenSequence& tokens, const Vocab& vocab, TimeSignature timesig = {4, 4},
             int ppq = 480, Warnings* warnings = nullptr);

}  // namespace musebar
