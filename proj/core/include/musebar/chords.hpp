// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

// Chord vocabulary (12 roots x 8 qualities + N.C.) and per-bar chord
// estimation by pitch-class template matching.

#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "musebar/midi_io.hpp"

namespace musebar {

enum class Quality { kMaj, kMin, kAug, kDim, kDom7, kMaj7, kMin7, kHalfDim7, kNoChord };

inline constexpr int kNumQualities = 8;
inline constexpr int kNumChords = 97;  // ids 0..95 plus N.C.
inline constexpr int kNoChordId = 96;

struct ChordLabel {
  std::optional<int> root;  // pitch class, C = 0
  Quality quality = Quality::kNoChord;

  static ChordLabel no_chord() { return {}; }
  bool is_no_chord() const { return quality == Quality::kNoChord; }
  friend bool operator==(const ChordLabel&, const ChordLabel&) = default;
};

// Pitch-class offsets from the root for a non-N.C. quality.
std::span<const int> template_offsets(Quality quality);

int chord_id(const ChordLabel& label);
ChordLabel id_to_chord(int id);

// Names follow the attribute table: "C:", "C#:m", "Eb:7", "A:m7b5", "N.C.".
std::string chord_name(int id);
std::string chord_name(const ChordLabel& label);
std::optional<int> chord_id_from_name(std::string_view name);
std::vector<std::string> all_chord_names();

struct ChordScoring {
  double root_bonus = 0.1;        // alpha
  double missing_penalty = 0.2;   // beta
  double min_coverage = 0.5;
};

struct ChordEstimate {
  ChordLabel label;
  double score = 0.0;
  double coverage = 0.0;
};

// Duration-weighted pitch-class histogram over the part of each note that
// lies inside the window.
std::array<double, 12> pitch_class_weights(std::span<const NoteEvent> notes, const BarWindow& bar);

ChordEstimate estimate_chord(std::span<const NoteEvent> notes, const BarWindow& bar,
                             const ChordScoring& scoring = {});

inline ChordLabel extract_chord(std::span<const NoteEvent> notes, const BarWindow& bar) {
  return estimate_chord(notes, bar).label;
}

}  // namespace musebar
