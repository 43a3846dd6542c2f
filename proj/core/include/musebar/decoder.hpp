// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

// Bar-by-bar generation: each bar is sampled up to K times and kept as soon
// as its extracted chord equals the requested one; otherwise the bar is
// decoded greedily.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "musebar/attributes.hpp"
#include "musebar/model.hpp"
#include "musebar/rng.hpp"

namespace musebar {

struct GenerationRequest {
  GlobalAttributes global;
  std::vector<int> chords;  // chord id per bar
  int k = 15;
  int top_k = 15;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  int max_tokens_per_bar = 128;
  // Tempo written to the rendered score; 0 picks a representative value for
  // the requested tempo bucket.
  double tempo_bpm = 0.0;

  void validate(int max_bars) const;
};

struct BarOutcome {
  int target = 0;
  int realized = 0;
  int attempts = 0;
  bool matched = false;
  bool fallback = false;
  int malformed = 0;  // attempts that hit the token cap
};

struct GenerationResult {
  TokenSequence tokens;  // music tokens, ending in EOS
  std::vector<BarOutcome> bars;
  bool truncated = false;
  std::int64_t tokens_fed = 0;  // forward steps spent on music tokens
  Warnings warnings;
};

struct SampleOptions {
  int top_k = 15;
  double temperature = 1.0;
  int max_tokens = 128;
  bool greedy = false;
};

struct BarSample {
  std::vector<TokenId> tokens;  // starts with the Bar token
  TokenId terminator = -1;      // Bar or EOS; -1 when the cap was hit
  bool malformed() const { return terminator < 0; }
};

// Picks the next token from `logits` restricted to music tokens: top_k
// highest (ties to the lower id), renormalised, tempered. greedy = argmax.
TokenId pick_token(const Eigen::VectorXf& logits, const Vocab& vocab, const SampleOptions& options, Rng& rng);

// Feeds a Bar token at `seq_pos` and samples until the model proposes the
// next Bar or EOS (not fed) or `max_tokens` bar tokens exist. `seq_pos`
// advances past every fed token.
BarSample sample_bar(const Params& params, const ModelConfig& config, const Vocab& vocab, DecodeState& state,
                     int& seq_pos, const SampleOptions& options, Rng& rng, std::int64_t* tokens_fed = nullptr);

// Chord id of bar `bar` in the score decoded from `music`.
int realized_chord(const std::vector<TokenId>& music, int bar, const Vocab& vocab);

GenerationResult generate(const Params& params, const ModelConfig& config, const Vocab& vocab,
                          const GenerationRequest& request);

double representative_bpm(int tempo_bucket);

// Score rendered from a result at the request's tempo.
Score render(const GenerationResult& result, const GenerationRequest& request, const Vocab& vocab);

// `{per_bar: [{target, realized, attempts, fallback, matched}], global_attrs, ...}`
std::string result_sidecar_json(const GenerationResult& result, const GenerationRequest& request);

// Writes `<stem>.mid` and `<stem>.json`.
void write_generation(const GenerationResult& result, const GenerationRequest& request, const Vocab& vocab,
                      const std::string& stem);

}  // namespace musebar
