// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

#include "musebar/synth.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>

#include "musebar/attributes.hpp"
#include "test_util.hpp"

namespace musebar {
namespace {

double agreement(const std::vector<SynthSong>& songs) {
  int match = 0, total = 0;
  for (const auto& s : songs) {
    const auto ids = extract_bar_chord_ids(s.score);
    EXPECT_EQ(ids.size(), s.chords.size());
    for (std::size_t i = 0; i < std::min(ids.size(), s.chords.size()); ++i) {
      match += ids[i] == s.chords[i] ? 1 : 0;
      ++total;
    }
  }
  return static_cast<double>(match) / total;
}

TEST(Synth, NoiseFreeCorpusIsRecoveredExactly) {
  SynthConfig c = SynthConfig::defaults();
  c.n_songs = 60;
  c.bars_per_song = 32;
  c.noise_rate = 0.0;
  EXPECT_EQ(agreement(gen_corpus(c)), 1.0);
}

TEST(Synth, NoiseFreeFullSupportCorpusIsRecoveredExactly) {
  SynthConfig c = SynthConfig::defaults(0.0);
  for (auto& p : c.chord_prior) p = 1.0;
  c.validate();
  c.n_songs = 40;
  c.noise_rate = 0.0;
  EXPECT_EQ(agreement(gen_corpus(c)), 1.0);
}

TEST(Synth, DefaultNoiseAgreementAtLeast98Percent) {
  SynthConfig c = SynthConfig::defaults();
  c.n_songs = 100;
  EXPECT_DOUBLE_EQ(c.noise_rate, 0.1);
  EXPECT_GE(agreement(gen_corpus(c)), 0.98);
}

TEST(Synth, ChordFrequenciesFollowPrior) {
  SynthConfig c = SynthConfig::defaults();
  c.n_songs = 320;
  c.bars_per_song = 32;  // 10240 bars
  std::array<int, kNumChords> counts{};
  int total = 0;
  for (const auto& s : gen_corpus(c)) {
    for (int id : s.chords) {
      ++counts[static_cast<std::size_t>(id)];
      ++total;
    }
  }
  const auto& table = pop909_chord_proportions();
  int checked = 0;
  for (int id = 0; id < kNumChords; ++id) {
    const double want = table[static_cast<std::size_t>(id)];
    const double got = 100.0 * counts[static_cast<std::size_t>(id)] / total;
    if (want >= 1.0) {
      EXPECT_NEAR(got, want, 2.0) << chord_name(id);
      ++checked;
    }
    if (want < 0.1) EXPECT_EQ(counts[static_cast<std::size_t>(id)], 0) << chord_name(id);
  }
  EXPECT_GE(checked, 10);
  EXPECT_NEAR(table[0], 17.11, 1e-12);
  EXPECT_NEAR(table[73], 18.31, 1e-12);
}

TEST(Synth, SameSeedSameCorpus) {
  SynthConfig c = SynthConfig::defaults();
  c.n_songs = 10;
  const auto a = gen_corpus(c);
  const auto b = gen_corpus(c);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].score, b[i].score);
    EXPECT_EQ(a[i].chords, b[i].chords);
  }
  c.seed = 2;
  EXPECT_NE(gen_corpus(c)[0].chords, a[0].chords);
}

TEST(Synth, TempoWithinRange) {
  SynthConfig c = SynthConfig::defaults();
  c.n_songs = 30;
  for (const auto& s : gen_corpus(c)) {
    const double bpm = s.score.tempo_events.at(0).bpm();
    EXPECT_GE(bpm, c.tempo_min_bpm - 0.5);
    EXPECT_LE(bpm, c.tempo_max_bpm + 0.5);
    EXPECT_EQ(s.chords.size(), 32u);
  }
}

TEST(Synth, ArpeggioUsesChordTones) {
  const ArpeggioPattern pattern{{0, 1, 2, 3}, {0, 4, 8, 12}, {4, 4, 4, 4}};
  const auto notes = render_arpeggio(73, pattern, 1920, 480, 70);  // A:m
  ASSERT_EQ(notes.size(), 4u);
  for (const auto& n : notes) {
    const int pc = n.pitch % 12;
    EXPECT_TRUE(pc == 9 || pc == 0 || pc == 4) << n.pitch;
    EXPECT_GE(n.onset, 1920);
    EXPECT_LE(n.end(), 3840);
  }
}

TEST(Synth, ConfigValidation) {
  SynthConfig c = SynthConfig::defaults();
  c.noise_rate = 0.6;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = SynthConfig::defaults();
  c.chord_prior.fill(0.0);
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = SynthConfig::defaults();
  c.chord_prior[3] = -1;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = SynthConfig::defaults();
  const double sum = std::accumulate(c.chord_prior.begin(), c.chord_prior.end(), 0.0);
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(Synth, WriteCorpusEmitsMidiAndTruth) {
  testing::TempDir dir("synth");
  SynthConfig c = SynthConfig::defaults();
  c.n_songs = 3;
  c.bars_per_song = 4;
  const auto songs = gen_corpus(c);
  const auto paths = write_corpus(songs, dir.str());
  ASSERT_EQ(paths.size(), 3u);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    EXPECT_TRUE(std::filesystem::exists(paths[i]));
    EXPECT_EQ(read_smf_file(paths[i]).notes, songs[i].score.notes);
  }
}

}  // namespace
}  // namespace musebar
