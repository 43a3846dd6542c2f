// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

#include "musebar/synth.hpp"

#include <algorithm>
#include <bitset>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "musebar/rng.hpp"

namespace musebar {

const std::array<double, kNumChords>& pop909_chord_proportions() {
  // Rows: roots C..B; columns: maj, m, +, dim, 7, maj7, m7, m7b5. Last: N.C.
  static const std::array<double, kNumChords> kTable = {
      17.11, 0.13, 0.08, 0.01, 0.17, 1.62, 0.05, 0.01,  // C
      0.38,  0.02, 0.01, 0.02, 0.01, 0.06, 0.02, 0.01,  // C#
      1.18,  8.03, 0.00, 0.06, 0.18, 0.03, 3.02, 0.09,  // D
      0.16,  0.09, 0.02, 0.01, 0.01, 0.03, 0.05, 0.01,  // Eb
      1.84,  6.97, 0.00, 0.05, 0.21, 0.01, 3.24, 0.03,  // E
      9.94,  0.57, 0.00, 0.01, 0.02, 2.25, 0.12, 0.00,  // F
      0.16,  0.09, 0.00, 0.20, 0.00, 0.04, 0.05, 0.08,  // F#
      14.13, 0.17, 0.00, 0.01, 0.98, 0.08, 0.12, 0.01,  // G
      0.45,  0.01, 0.00, 0.04, 0.02, 0.06, 0.01, 0.00,  // Ab
      0.63,  18.31, 0.00, 0.01, 0.07, 0.02, 3.91, 0.01, // A
      0.52,  0.23, 0.00, 0.00, 0.01, 0.07, 0.08, 0.00,  // Bb
      0.07,  0.21, 0.00, 0.22, 0.01, 0.00, 0.12, 0.48,  // B
      0.37};
  return kTable;
}

SynthConfig SynthConfig::defaults(double min_percent) {
  SynthConfig c;
  const auto& table = pop909_chord_proportions();
  for (int i = 0; i < kNumChords; ++i) {
    c.chord_prior[static_cast<std::size_t>(i)] =
        table[static_cast<std::size_t>(i)] >= min_percent - 1e-12 ? table[static_cast<std::size_t>(i)] : 0.0;
  }
  const std::vector<int> quarters = {0, 4, 8, 12};
  const std::vector<int> quarter_len = {4, 4, 4, 4};
  c.arpeggios = {
      {{0, 1, 2, 3}, quarters, quarter_len},
      {{0, 2, 1, 3}, quarters, quarter_len},
      {{0, 2, 3, 1}, quarters, quarter_len},
      {{0, 1, 3, 2}, quarters, quarter_len},
  };
  c.melodies = {
      {{0, 8}, {8, 8}},
      {{0, 12}, {12, 4}},
      {{0, 4}, {4, 12}},
      {{0, 10}, {10, 6}},
  };
  c.validate();
  return c;
}

void SynthConfig::validate() {
  double total = 0.0;
  for (double p : chord_prior) {
    if (p < 0.0) throw InvalidArgument("chord prior must be non-negative");
    total += p;
  }
  if (total <= 0.0) throw InvalidArgument("chord prior is empty");
  for (double& p : chord_prior) p /= total;
  if (noise_rate < 0.0 || noise_rate > 0.5) throw InvalidArgument("noise rate must lie in [0, 0.5]");
  if (persistence < 0.0 || persistence > 1.0) throw InvalidArgument("persistence must lie in [0, 1]");
  if (n_songs < 1 || bars_per_song < 1) throw InvalidArgument("corpus must have songs and bars");
  if (arpeggios.empty() || melodies.empty()) throw InvalidArgument("need patterns and rhythms");
  for (const auto& a : arpeggios) {
    if (a.tones.size() != a.onsets.size() || a.tones.size() != a.durations.size()) {
      throw InvalidArgument("arpeggio pattern fields differ in length");
    }
  }
  for (const auto& m : melodies) {
    if (m.onsets.size() != m.durations.size() || m.onsets.empty()) {
      throw InvalidArgument("melody rhythm fields differ in length");
    }
  }
  if (tempo_min_bpm <= 0.0 || tempo_max_bpm < tempo_min_bpm) throw InvalidArgument("bad tempo range");
}

namespace {

Tick step_ticks(int steps, int ppq) { return static_cast<Tick>(steps) * ppq / 4; }

std::vector<int> chord_pitch_classes(int chord) {
  const ChordLabel c = id_to_chord(chord);
  std::vector<int> pcs;
  for (int off : template_offsets(c.quality)) pcs.push_back((*c.root + off) % 12);
  return pcs;
}

// Non-chord pitch classes that neither extend the chord into another
// template nor form one with a subset of the chord tones.
std::vector<int> passing_tone_classes(int chord) {
  std::bitset<12> base;
  for (int pc : chord_pitch_classes(chord)) base.set(static_cast<std::size_t>(pc));
  std::vector<int> out;
  for (int pc = 0; pc < 12; ++pc) {
    if (base.test(static_cast<std::size_t>(pc))) continue;
    std::bitset<12> with = base;
    with.set(static_cast<std::size_t>(pc));
    bool clashes = false;
    for (int id = 0; id < kNoChordId && !clashes; ++id) {
      std::bitset<12> t;
      for (int p : chord_pitch_classes(id)) t.set(static_cast<std::size_t>(p));
      clashes = (with & ~t).none() || (t.test(static_cast<std::size_t>(pc)) && (t & ~with).none());
    }
    if (!clashes) out.push_back(pc);
  }
  return out;
}

int nearest_pitch(int pc, int target, int lo, int hi) {
  int best = -1;
  for (int p = lo; p <= hi; ++p) {
    if (p % 12 != pc) continue;
    if (best < 0 || std::abs(p - target) < std::abs(best - target)) best = p;
  }
  return best;
}

}  // namespace

std::vector<NoteEvent> render_arpeggio(int chord, const ArpeggioPattern& pattern, Tick bar_start,
                                       int ppq, int velocity) {
  std::vector<NoteEvent> notes;
  if (chord == kNoChordId) return notes;
  const ChordLabel c = id_to_chord(chord);
  const auto offsets = template_offsets(c.quality);
  const int n = static_cast<int>(offsets.size());
  const int root_pitch = 48 + *c.root;
  for (std::size_t i = 0; i < pattern.tones.size(); ++i) {
    const int idx = pattern.tones[i];
    const int pitch = root_pitch + 12 * (idx / n) + offsets[static_cast<std::size_t>(idx % n)];
    notes.push_back(NoteEvent{bar_start + step_ticks(pattern.onsets[i], ppq),
                              step_ticks(pattern.durations[i], ppq), pitch, velocity, 0});
  }
  return notes;
}

std::vector<SynthSong> gen_corpus(SynthConfig config) {
  config.validate();
  const Rng root(config.seed);
  std::vector<SynthSong> songs;
  songs.reserve(static_cast<std::size_t>(config.n_songs));
  const Tick bar_ticks = bar_length(config.ppq, {4, 4});

  for (int s = 0; s < config.n_songs; ++s) {
    Rng rng = root.fork(static_cast<std::uint64_t>(s));
    SynthSong song;
    Score& score = song.score;
    score.ppq = config.ppq;
    const double bpm = config.tempo_min_bpm + (config.tempo_max_bpm - config.tempo_min_bpm) * rng.uniform01();
    score.tempo_events.push_back(TempoEvent{0, static_cast<int>(std::lround(60'000'000.0 / bpm))});
    score.timesig_events.push_back(TimeSigEvent{0, {4, 4}});

    const auto& arp = config.arpeggios[rng.uniform_int(config.arpeggios.size())];
    const int lh_velocity = rng.uniform_range(48, 68);
    const int rh_velocity = rng.uniform_range(72, 100);
    int melody_prev = rng.uniform_range(74, 84);

    int prev = -1;
    for (int b = 0; b < config.bars_per_song; ++b) {
      int chord;
      if (prev >= 0 && rng.bernoulli(config.persistence)) {
        chord = prev;
      } else {
        chord = static_cast<int>(rng.categorical(config.chord_prior));
      }
      prev = chord;
      song.chords.push_back(chord);
      const Tick start = static_cast<Tick>(b) * bar_ticks;
      if (chord == kNoChordId) continue;

      for (auto& n : render_arpeggio(chord, arp, start, config.ppq, lh_velocity)) {
        score.notes.push_back(n);
      }

      const auto& rhythm = config.melodies[rng.uniform_int(config.melodies.size())];
      const auto pcs = chord_pitch_classes(chord);
      std::vector<NoteEvent> melody;
      for (std::size_t i = 0; i < rhythm.onsets.size(); ++i) {
        const int pc = pcs[rng.uniform_int(pcs.size())];
        const int pitch = nearest_pitch(pc, melody_prev + rng.uniform_range(-4, 4), 72, 88);
        melody_prev = pitch;
        melody.push_back(NoteEvent{start + step_ticks(rhythm.onsets[i], config.ppq),
                                   step_ticks(rhythm.durations[i], config.ppq), pitch,
                                   std::clamp(rh_velocity + rng.uniform_range(-6, 6), 1, 127), 0});
      }
      if (rng.bernoulli(config.noise_rate)) {
        const auto passing = passing_tone_classes(chord);
        if (!passing.empty()) {
          // The shortest melody note becomes a passing tone near its pitch.
          auto shortest = std::min_element(melody.begin(), melody.end(),
                                           [](const auto& a, const auto& b) { return a.duration < b.duration; });
          const int pc = passing[rng.uniform_int(passing.size())];
          shortest->pitch = nearest_pitch(pc, shortest->pitch, 72, 88);
        }
      }
      for (const auto& n : melody) score.notes.push_back(n);
    }
    score.end_tick = static_cast<Tick>(config.bars_per_song) * bar_ticks;
    normalize(score);
    songs.push_back(std::move(song));
  }
  return songs;
}

std::vector<std::string> write_corpus(const std::vector<SynthSong>& songs, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::string> paths;
  for (std::size_t i = 0; i < songs.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "song-%05zu", i);
    const fs::path mid = fs::path(dir) / (std::string(stem) + ".mid");
    write_smf_file(songs[i].score, mid.string());
    nlohmann::json sidecar;
    sidecar["chords"] = songs[i].chords;
    std::vector<std::string> names;
    for (int c : songs[i].chords) names.push_back(chord_name(c));
    sidecar["chord_names"] = names;
    std::ofstream((fs::path(dir) / (std::string(stem) + ".json")).string()) << sidecar.dump() << '\n';
    paths.push_back(mid.string());
  }
  return paths;
}

}  // namespace musebar
