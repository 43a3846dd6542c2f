// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic pop-piano corpus with known per-bar chords: a left-hand broken
// chord under a chord-tone melody, with optional passing tones.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "musebar/chords.hpp"
#include "musebar/midi_io.hpp"

namespace musebar {

// Chord proportions (percent) of the POP909 corpus, indexed by chord id.
const std::array<double, kNumChords>& pop909_chord_proportions();

struct ArpeggioPattern {
  // Index into the chord's tones; indices past the last tone wrap an octave up.
  std::vector<int> tones;
  std::vector<int> onsets;     // grid steps (quarter = 4)
  std::vector<int> durations;  // grid steps
};

struct MelodyRhythm {
  std::vector<int> onsets;
  std::vector<int> durations;
};

struct SynthConfig {
  int n_songs = 700;
  int bars_per_song = 32;
  std::array<double, kNumChords> chord_prior{};  // normalized by validate()
  double persistence = 0.25;
  std::vector<ArpeggioPattern> arpeggios;
  std::vector<MelodyRhythm> melodies;
  double noise_rate = 0.1;
  double tempo_min_bpm = 60.0;
  double tempo_max_bpm = 150.0;
  int ppq = 480;
  std::uint64_t seed = 1;

  // Prior restricted to chords with proportion >= min_percent, patterns and
  // rhythms set to the built-in defaults.
  static SynthConfig defaults(double min_percent = 0.1);
  // Throws InvalidArgument; normalizes the prior in place.
  void validate();
};

struct SynthSong {
  Score score;
  std::vector<int> chords;  // ground truth per bar
};

// Renders one bar of `chord_id` starting at `bar_start`. Exposed so tests can
// build broken-chord fixtures with the same voicing rules.
std::vector<NoteEvent> render_arpeggio(int chord_id, const ArpeggioPattern& pattern, Tick bar_start,
                                       int ppq, int velocity);

std::vector<SynthSong> gen_corpus(SynthConfig config);

// Writes song-XXXXX.mid plus song-XXXXX.json ({"chords": [...], "seed": n})
// into `dir` (created if needed). Returns the MIDI paths.
std::vector<std::string> write_corpus(const std::vector<SynthSong>& songs, const std::string& dir);

}  // namespace musebar
