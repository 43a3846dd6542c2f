// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

#include "musebar/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <nlohmann/json.hpp>

#include "musebar/chords.hpp"

namespace musebar {

void GenerationRequest::validate(int max_bars) const {
  if (k < 1) throw InvalidArgument("K must be at least 1");
  if (top_k < 1) throw InvalidArgument("top_k must be at least 1");
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  if (max_tokens_per_bar < 2) throw InvalidArgument("max_tokens_per_bar must be at least 2");
  if (chords.empty() || static_cast<int>(chords.size()) > max_bars) {
    throw InvalidArgument("chord progression must have 1.." + std::to_string(max_bars) + " bars");
  }
  for (int c : chords) {
    if (c < 0 || c >= kNumChords) throw InvalidArgument("chord id out of range");
  }
}

TokenId pick_token(const Eigen::VectorXf& logits, const Vocab& vocab, const SampleOptions& options, Rng& rng) {
  std::vector<TokenId> candidates;
  candidates.reserve(static_cast<std::size_t>(logits.size()));
  for (TokenId id = 0; id < logits.size(); ++id) {
    if (vocab.is_music_token(id)) candidates.push_back(id);
  }
  auto better = [&logits](TokenId a, TokenId b) {
    return logits(a) > logits(b) || (logits(a) == logits(b) && a < b);
  };
  const int k = options.greedy ? 1 : std::min<int>(options.top_k, static_cast<int>(candidates.size()));
  std::partial_sort(candidates.begin(), candidates.begin() + k, candidates.end(), better);
  if (k == 1) return candidates.front();
  const double top = logits(candidates.front());
  std::vector<double> weights(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    weights[static_cast<std::size_t>(i)] =
        std::exp((static_cast<double>(logits(candidates[static_cast<std::size_t>(i)])) - top) / options.temperature);
  }
  return candidates[rng.categorical(weights)];
}

BarSample sample_bar(const Params& params, const ModelConfig& config, const Vocab& vocab, DecodeState& state,
                     int& seq_pos, const SampleOptions& options, Rng& rng, std::int64_t* tokens_fed) {
  BarSample out;
  TokenId next = vocab.bar();
  while (true) {
    if (state.length() >= config.max_seq_len || seq_pos >= config.max_seq_len) {
      out.terminator = -1;
      return out;
    }
    const Eigen::VectorXf logits = decode_step(params, config, state, next, seq_pos, -1);
    ++seq_pos;
    if (tokens_fed != nullptr) ++*tokens_fed;
    out.tokens.push_back(next);
    if (!logits.allFinite()) throw NonFiniteError("logits", std::nan(""));
    next = pick_token(logits, vocab, options, rng);
    if (next == vocab.bar() || next == vocab.eos()) {
      out.terminator = next;
      return out;
    }
    if (static_cast<int>(out.tokens.size()) >= options.max_tokens) {
      out.terminator = -1;
      return out;
    }
  }
}

int realized_chord(const std::vector<TokenId>& music, int bar, const Vocab& vocab) {
  const Score score = decode(make_token_sequence(music, vocab), vocab);
  const auto ids = extract_bar_chord_ids(score);
  if (bar < 0 || bar >= static_cast<int>(ids.size())) return kNoChordId;
  return ids[static_cast<std::size_t>(bar)];
}

GenerationResult generate(const Params& params, const ModelConfig& config, const Vocab& vocab,
                          const GenerationRequest& request) {
  request.validate(config.max_bars);
  if (!params.all_finite()) throw NonFiniteError("parameters", std::nan(""));
  GenerationResult result;
  Rng rng(request.seed);

  const PromptSequence prompt = build_prompt(request.global, request.chords, vocab);
  const ModelInput head = assemble_input(prompt, TokenSequence{}, PromptMode::kGeneration, vocab, false);
  DecodeState state(config);
  for (int t = 0; t < head.length(); ++t) {
    const auto i = static_cast<std::size_t>(t);
    decode_step(params, config, state, head.ids[i], head.seq_pos[i], head.bar_pos[i]);
  }

  std::vector<TokenId> music;
  int seq_pos = 1;
  const int n_bars = static_cast<int>(request.chords.size());
  SampleOptions sampling{request.top_k, request.temperature, request.max_tokens_per_bar, false};
  SampleOptions greedy = sampling;
  greedy.greedy = true;

  for (int b = 0; b < n_bars; ++b) {
    BarOutcome outcome;
    outcome.target = request.chords[static_cast<std::size_t>(b)];
    const int state_mark = state.length();
    const int seq_mark = seq_pos;
    BarSample kept;
    for (int attempt = 1; attempt <= request.k; ++attempt) {
      state.truncate(state_mark);
      seq_pos = seq_mark;
      BarSample s = sample_bar(params, config, vocab, state, seq_pos, sampling, rng, &result.tokens_fed);
      outcome.attempts = attempt;
      if (s.malformed()) {
        ++outcome.malformed;
        kept = std::move(s);
        continue;
      }
      std::vector<TokenId> candidate = music;
      candidate.insert(candidate.end(), s.tokens.begin(), s.tokens.end());
      outcome.realized = realized_chord(candidate, b, vocab);
      kept = std::move(s);
      if (outcome.realized == outcome.target) {
        outcome.matched = true;
        break;
      }
    }
    // A single attempt is plain sampling; the greedy fallback needs K > 1.
    if (!outcome.matched && request.k > 1) {
      state.truncate(state_mark);
      seq_pos = seq_mark;
      kept = sample_bar(params, config, vocab, state, seq_pos, greedy, rng, &result.tokens_fed);
      outcome.fallback = true;
    }
    if (kept.malformed()) {
      warn(&result.warnings, "bar " + std::to_string(b) + " hit the token cap");
    }
    music.insert(music.end(), kept.tokens.begin(), kept.tokens.end());
    outcome.realized = realized_chord(music, b, vocab);
    outcome.matched = outcome.realized == outcome.target;
    result.bars.push_back(outcome);
    if (kept.terminator == vocab.eos() && b + 1 < n_bars) {
      result.truncated = true;
      warn(&result.warnings, "EOS after bar " + std::to_string(b) + " of " + std::to_string(n_bars));
      break;
    }
  }
  music.push_back(vocab.eos());
  result.tokens = make_token_sequence(std::move(music), vocab);
  return result;
}

double representative_bpm(int tempo_bucket) {
  switch (tempo_bucket) {
    case 0: return 66.0;
    case 1: return 98.0;
    case 2: return 132.0;
    default: return 120.0;
  }
}

Score render(const GenerationResult& result, const GenerationRequest& request, const Vocab& vocab) {
  Score score = decode(result.tokens, vocab);
  const double bpm = request.tempo_bpm > 0.0 ? request.tempo_bpm : representative_bpm(request.global.tempo_bucket);
  score.tempo_events = {TempoEvent{0, static_cast<int>(std::lround(60'000'000.0 / bpm))}};
  return score;
}

std::string result_sidecar_json(const GenerationResult& result, const GenerationRequest& request) {
  nlohmann::ordered_json j;
  nlohmann::json per_bar = nlohmann::json::array();
  for (const auto& b : result.bars) {
    per_bar.push_back({{"target", chord_name(b.target)},
                       {"realized", chord_name(b.realized)},
                       {"attempts", b.attempts},
                       {"fallback", b.fallback},
                       {"matched", b.matched}});
  }
  j["per_bar"] = per_bar;
  nlohmann::ordered_json g;
  const auto v = request.global.values();
  for (int a = 0; a < kNumGlobalAttributes; ++a) {
    g[std::string(kGlobalAttributeNames[static_cast<std::size_t>(a)])] = v[static_cast<std::size_t>(a)];
  }
  j["global_attrs"] = g;
  j["chords"] = request.chords;
  j["k"] = request.k;
  j["top_k"] = request.top_k;
  j["temperature"] = request.temperature;
  j["seed"] = request.seed;
  j["truncated"] = result.truncated;
  j["tokens_fed"] = result.tokens_fed;
  j["warnings"] = result.warnings;
  return j.dump(2);
}

void write_generation(const GenerationResult& result, const GenerationRequest& request, const Vocab& vocab,
                      const std::string& stem) {
  write_smf_file(render(result, request, vocab), stem + ".mid");
  std::ofstream f(stem + ".json");
  if (!f) throw Error("cannot write " + stem + ".json");
  f << result_sidecar_json(result, request) << '\n';
}

}  // namespace musebar
