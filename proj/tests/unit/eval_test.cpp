// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

#include "musebar/eval.hpp"

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <set>

#include "musebar/synth.hpp"
#include "test_util.hpp"

namespace musebar {
namespace {

class EvalTest : public ::testing::Test {
 protected:
  Vocab vocab = build_vocab();

  // A result whose music is `clip` and whose request asks for `targets`.
  std::pair<GenerationResult, GenerationRequest> pair_for(const Score& clip, std::vector<int> targets,
                                                          GlobalAttributes g = GlobalAttributes::all_na()) const {
    GenerationResult r;
    TokenSequence t = encode(clip, vocab);
    t.ids.push_back(vocab.eos());
    r.tokens = make_token_sequence(t.ids, vocab);
    GenerationRequest q;
    q.chords = std::move(targets);
    q.global = g;
    return {r, q};
  }
};

Score block_bars(const std::vector<std::vector<int>>& bars) {
  std::vector<NoteEvent> notes;
  for (std::size_t b = 0; b < bars.size(); ++b)
    for (int p : bars[b]) notes.push_back(NoteEvent{static_cast<Tick>(b) * 1920, 1920, p, 80, 0});
  Score s = testing::make_score(notes);
  s.end_tick = static_cast<Tick>(bars.size()) * 1920;
  return s;
}

TEST_F(EvalTest, ChordAccuracyAllAndHalf) {
  std::vector<std::vector<int>> bars;
  std::vector<int> truth, half;
  for (int b = 0; b < 32; ++b) {
    bars.push_back(b % 2 ? std::vector<int>{57, 60, 64} : std::vector<int>{60, 64, 67});
    truth.push_back(b % 2 ? 73 : 0);
    half.push_back(b % 2 ? 73 : 8);
  }
  const Score s = block_bars(bars);
  auto [r1, q1] = pair_for(s, truth);
  EXPECT_DOUBLE_EQ(chord_accuracy({r1}, {q1}, vocab), 1.0);
  auto [r2, q2] = pair_for(s, half);
  EXPECT_DOUBLE_EQ(chord_accuracy({r2}, {q2}, vocab), 0.5);
  EXPECT_DOUBLE_EQ(chord_accuracy({r1, r2}, {q1, q2}, vocab), 0.75);
  EXPECT_EQ(count_matched_bars(s, half), 16);
  EXPECT_THROW(chord_accuracy({r1}, {}, vocab), InvalidArgument);
}

TEST_F(EvalTest, SourceClipMatchesAllGlobalAttributes) {
  SynthConfig sc = SynthConfig::defaults();
  sc.n_songs = 3;
  sc.bars_per_song = 16;
  for (const auto& song : gen_corpus(sc)) {
    // Tokenize and decode so the clip carries the generated tempo and grid.
    const Score round = decode(encode(song.score, vocab), vocab);
    Score clip = round;
    clip.tempo_events = song.score.tempo_events;
    const GlobalAttributes g = extract_global(clip);
    const auto m = global_matches(clip, g);
    for (bool x : m) EXPECT_TRUE(x);
  }
}

TEST_F(EvalTest, NaPromptsCountAsMatched) {
  const Score s = block_bars({{60, 64, 67}, {60, 64, 67}});
  GlobalAttributes wrong = extract_global(s);
  wrong.pitch_range = (wrong.pitch_range + 5) % 12;
  wrong.rhythm_intensity = (wrong.rhythm_intensity + 1) % 3;
  auto m = global_matches(s, wrong);
  EXPECT_FALSE(m[1]);
  EXPECT_FALSE(m[2]);
  GlobalAttributes na = wrong;
  na.pitch_range = na_value(1);
  na.rhythm_intensity = na_value(2);
  m = global_matches(s, na);
  EXPECT_TRUE(m[1]);
  EXPECT_TRUE(m[2]);
  for (bool x : global_matches(Score{}, GlobalAttributes::all_na())) EXPECT_TRUE(x);
}

TEST_F(EvalTest, GlobalAccuracyUsesRenderedTempo) {
  const Score s = block_bars({{60, 64, 67}, {57, 60, 64}});
  GlobalAttributes g = GlobalAttributes::all_na();
  g.tempo_bucket = 0;
  auto [r, q] = pair_for(s, {0, 73}, g);
  const auto acc = global_attribute_accuracy({r}, {q}, vocab);
  EXPECT_DOUBLE_EQ(acc.per_attribute[6], 1.0);
  EXPECT_DOUBLE_EQ(acc.average, 1.0);
  q.global.tempo_bucket = 2;
  q.tempo_bpm = 90;
  EXPECT_DOUBLE_EQ(global_attribute_accuracy({r}, {q}, vocab).per_attribute[6], 0.0);
}

TEST_F(EvalTest, ReportJsonAndTable) {
  const Score s = block_bars({{60, 64, 67}, {57, 60, 64}});
  auto [r, q] = pair_for(s, {0, 0});
  EvalReport rep = make_report({r}, {q}, vocab);
  rep.per_k.push_back(KBreakdown{15, 0.5, 2, 3.0, 0.1});
  EXPECT_EQ(rep.n_bars, 2);
  EXPECT_EQ(rep.n_clips, 1);
  const auto j = nlohmann::json::parse(rep.to_json());
  EXPECT_DOUBLE_EQ(j.at("chord_accuracy").get<double>(), 0.5);
  EXPECT_EQ(j.at("global_attribute_accuracy").size(), 8u);
  EXPECT_EQ(j.at("per_k").at(0).at("k"), 15);
  EXPECT_NE(rep.to_table().find("50.00"), std::string::npos) << rep.to_table();
  EXPECT_EQ(make_report({r}, {q}, vocab).to_json(), make_report({r}, {q}, vocab).to_json());
}

TEST(Splits, EightyTenTenAndDisjoint) {
  std::vector<int> ids;
  for (int i = 0; i < 100; ++i) ids.push_back(i);
  const Splits s = make_splits(ids, {0.8, 0.1, 0.1}, 3);
  EXPECT_EQ(s.train.size(), 80u);
  EXPECT_EQ(s.valid.size(), 10u);
  EXPECT_EQ(s.test.size(), 10u);
  std::set<int> all(s.train.begin(), s.train.end());
  all.insert(s.valid.begin(), s.valid.end());
  all.insert(s.test.begin(), s.test.end());
  EXPECT_EQ(all.size(), 100u);
  const Splits again = make_splits(ids, {0.8, 0.1, 0.1}, 3);
  EXPECT_EQ(again.train, s.train);
  EXPECT_EQ(again.test, s.test);
  EXPECT_NE(make_splits(ids, {0.8, 0.1, 0.1}, 4).test, s.test);
  EXPECT_THROW(make_splits(ids, {0.8, 0.1, 0.2}, 1), InvalidArgument);
  const Splits small = make_splits({1, 2, 3, 4, 5, 6, 7}, {0.8, 0.1, 0.1}, 1);
  EXPECT_EQ(small.train.size() + small.valid.size() + small.test.size(), 7u);
}

TEST(Clips, SixteenBarScoreGivesOneClip) {
  Rng rng(1);
  const Score s = testing::random_grid_score(rng, 16);
  Score full = s;
  full.end_tick = 16 * 1920;
  Warnings w;
  const auto clips = extract_clips(full, 3, 16, rng, &w);
  ASSERT_EQ(clips.size(), 1u);
  EXPECT_EQ(clips[0].bar_offset, 0);
  EXPECT_FALSE(w.empty());
  EXPECT_EQ(extract_global(clips[0].score).bar_bucket, clips[0].score.notes.empty() ? na_value(3) : 3);
}

TEST(Clips, DistinctStartsAndSixteenBars) {
  SynthConfig sc = SynthConfig::defaults();
  sc.n_songs = 10;
  sc.bars_per_song = 32;
  sc.noise_rate = 0.0;
  Rng rng(2);
  for (const auto& song : gen_corpus(sc)) {
    const auto clips = extract_clips(song.score, 3, 16, rng);
    ASSERT_EQ(clips.size(), 3u);
    std::set<int> starts;
    for (const auto& c : clips) {
      starts.insert(c.bar_offset);
      EXPECT_EQ(segment_bars(c.score).size(), 16u);
      EXPECT_EQ(extract_global(c.score).bar_bucket, 3);
      const auto ids = extract_bar_chord_ids(c.score);
      for (int b = 0; b < 16; ++b) {
        EXPECT_EQ(ids[static_cast<std::size_t>(b)], song.chords[static_cast<std::size_t>(c.bar_offset + b)])
            << "noise-free bars keep their label after slicing";
        if (ids[static_cast<std::size_t>(b)] != song.chords[static_cast<std::size_t>(c.bar_offset + b)]) break;
      }
    }
    EXPECT_EQ(starts.size(), 3u);
  }
  Warnings w;
  EXPECT_TRUE(extract_clips(testing::make_score({NoteEvent{0, 100, 60, 80, 0}}), 3, 16, rng, &w).empty());
  EXPECT_FALSE(w.empty());
}

TEST_F(EvalTest, DecoderFlagsAgreeWithRecomputedAccuracy) {
  ModelConfig c = testing::tiny_config(vocab.size(), 1, 16, 2);
  c.max_seq_len = 512;
  const Params p = testing::random_params<float>(c, 3, 0.4);
  std::vector<GenerationResult> results;
  std::vector<GenerationRequest> requests;
  Rng rng(4);
  long flagged = 0, bars = 0;
  for (int i = 0; i < 6; ++i) {
    GenerationRequest q;
    q.global = GlobalAttributes::all_na();
    for (int b = 0; b < 4; ++b) q.chords.push_back(rng.bernoulli(0.6) ? kNoChordId : rng.uniform_range(0, 95));
    q.k = 3;
    q.max_tokens_per_bar = 30;
    q.seed = static_cast<std::uint64_t>(i);
    const auto r = generate(p, c, vocab, q);
    if (r.truncated) continue;
    for (const auto& b : r.bars) flagged += b.matched ? 1 : 0;
    bars += static_cast<long>(q.chords.size());
    results.push_back(r);
    requests.push_back(q);
  }
  ASSERT_GT(bars, 0);
  EXPECT_DOUBLE_EQ(chord_accuracy(results, requests, vocab), static_cast<double>(flagged) / static_cast<double>(bars));
}

}  // namespace
}  // namespace musebar
