// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

#include "musebar/chords.hpp"

#include <algorithm>
#include <limits>

namespace musebar {

namespace {

constexpr std::array<std::string_view, 12> kRootNames = {
    "C", "C#", "D", "Eb", "E", "F", "F#", "G", "Ab", "A", "Bb", "B"};
constexpr std::array<std::string_view, kNumQualities> kQualitySuffix = {
    "", "m", "+", "dim", "7", "maj7", "m7", "m7b5"};

constexpr int kMaj[] = {0, 4, 7};
constexpr int kMin[] = {0, 3, 7};
constexpr int kAug[] = {0, 4, 8};
constexpr int kDim[] = {0, 3, 6};
constexpr int kDom7[] = {0, 4, 7, 10};
constexpr int kMaj7[] = {0, 4, 7, 11};
constexpr int kMin7[] = {0, 3, 7, 10};
constexpr int kHalfDim7[] = {0, 3, 6, 10};

}  // namespace

std::span<const int> template_offsets(Quality quality) {
  switch (quality) {
    case Quality::kMaj: return kMaj;
    case Quality::kMin: return kMin;
    case Quality::kAug: return kAug;
    case Quality::kDim: return kDim;
    case Quality::kDom7: return kDom7;
    case Quality::kMaj7: return kMaj7;
    case Quality::kMin7: return kMin7;
    case Quality::kHalfDim7: return kHalfDim7;
    case Quality::kNoChord: break;
  }
  return {};
}

int chord_id(const ChordLabel& label) {
  if (label.is_no_chord() || !label.root) return kNoChordId;
  return *label.root * kNumQualities + static_cast<int>(label.quality);
}

ChordLabel id_to_chord(int id) {
  if (id < 0 || id > kNoChordId) throw InvalidArgument("chord id out of range: " + std::to_string(id));
  if (id == kNoChordId) return ChordLabel::no_chord();
  return ChordLabel{id / kNumQualities, static_cast<Quality>(id % kNumQualities)};
}

std::string chord_name(int id) {
  if (id == kNoChordId) return "N.C.";
  const ChordLabel c = id_to_chord(id);
  return std::string(kRootNames[static_cast<std::size_t>(*c.root)]) + ":" +
         std::string(kQualitySuffix[static_cast<std::size_t>(c.quality)]);
}

std::string chord_name(const ChordLabel& label) { return chord_name(chord_id(label)); }

std::optional<int> chord_id_from_name(std::string_view name) {
  for (int id = 0; id < kNumChords; ++id) {
    if (chord_name(id) == name) return id;
  }
  return std::nullopt;
}

std::vector<std::string> all_chord_names() {
  std::vector<std::string> names;
  for (int id = 0; id < kNumChords; ++id) names.push_back(chord_name(id));
  return names;
}

std::array<double, 12> pitch_class_weights(std::span<const NoteEvent> notes, const BarWindow& bar) {
  std::array<double, 12> w{};
  for (const auto& n : notes) {
    const Tick lo = std::max(n.onset, bar.start_tick);
    const Tick hi = std::min(n.end(), bar.end_tick);
    if (hi > lo) w[static_cast<std::size_t>(n.pitch % 12)] += static_cast<double>(hi - lo);
  }
  return w;
}

ChordEstimate estimate_chord(std::span<const NoteEvent> notes, const BarWindow& bar,
                             const ChordScoring& scoring) {
  const auto w = pitch_class_weights(notes, bar);
  double total = 0.0;
  for (double x : w) total += x;
  if (total <= 0.0) return {};

  // Lowest sounding pitch inside the window, used only to break exact ties
  // between templates with identical pitch-class sets (augmented triads).
  int bass = 128;
  for (const auto& n : notes) {
    if (std::min(n.end(), bar.end_tick) > std::max(n.onset, bar.start_tick)) {
      bass = std::min(bass, n.pitch);
    }
  }
  const int bass_pc = bass < 128 ? bass % 12 : -1;

  ChordEstimate best;
  best.score = -std::numeric_limits<double>::infinity();
  int best_size = 0;
  bool best_on_bass = false;
  for (int id = 0; id < kNoChordId; ++id) {
    const ChordLabel c = id_to_chord(id);
    const auto offsets = template_offsets(c.quality);
    double covered = 0.0;
    int missing = 0;
    for (int off : offsets) {
      const double x = w[static_cast<std::size_t>((*c.root + off) % 12)];
      covered += x;
      if (x <= 0.0) ++missing;
    }
    const double coverage = covered / total;
    const bool root_present = w[static_cast<std::size_t>(*c.root)] > 0.0;
    const double score = coverage -
                         scoring.missing_penalty * missing / static_cast<double>(offsets.size()) +
                         (root_present ? scoring.root_bonus : 0.0);
    const int size = static_cast<int>(offsets.size());
    const bool on_bass = *c.root == bass_pc;
    // Ties: fewer template notes, then root on the bass, then lower id.
    constexpr double kTieEps = 1e-9;
    const bool better =
        score > best.score + kTieEps ||
        (score >= best.score - kTieEps &&
         (size < best_size || (size == best_size && on_bass && !best_on_bass)));
    if (better) {
      best = ChordEstimate{c, score, coverage};
      best_size = size;
      best_on_bass = on_bass;
    }
  }
  if (best.coverage < scoring.min_coverage) {
    return ChordEstimate{ChordLabel::no_chord(), best.score, best.coverage};
  }
  return best;
}

}  // namespace musebar
