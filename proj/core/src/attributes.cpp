// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

#include "musebar/attributes.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

namespace musebar {

std::array<int, kNumGlobalAttributes> GlobalAttributes::values() const {
  return {instrument, pitch_range, rhythm_intensity, bar_bucket,
          time_signature, key, tempo_bucket, time_bucket};
}

GlobalAttributes GlobalAttributes::from_values(const std::array<int, kNumGlobalAttributes>& v) {
  for (int a = 0; a < kNumGlobalAttributes; ++a) {
    const int x = v[static_cast<std::size_t>(a)];
    if (x < 0 || x > na_value(a)) {
      throw InvalidArgument(std::string(kGlobalAttributeNames[static_cast<std::size_t>(a)]) +
                            " value out of range: " + std::to_string(x));
    }
  }
  return GlobalAttributes{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
}

int bar_count_bucket(int bars) {
  if (bars < 1 || bars > 16) return na_value(3);
  return (bars - 1) / 4;
}

int time_signature_code(TimeSignature sig) {
  const std::pair<int, int> s{sig.numerator, sig.denominator};
  if (s == std::pair{4, 4}) return 0;
  if (s == std::pair{2, 4}) return 1;
  if (s == std::pair{3, 4}) return 2;
  if (s == std::pair{1, 4}) return 3;
  if (s == std::pair{6, 8}) return 4;
  if (s == std::pair{3, 8}) return 5;
  return 6;
}

int tempo_bucket(double bpm, const AttributeThresholds& t) {
  if (bpm <= t.tempo_slow_max) return 0;
  if (bpm < t.tempo_fast_min) return 1;
  return 2;
}

int seconds_bucket(double seconds) {
  if (seconds < 15.0) return 0;
  if (seconds < 30.0) return 1;
  if (seconds < 45.0) return 2;
  if (seconds < 60.0) return 3;
  return 4;
}

double score_seconds(const Score& score, Tick end) {
  double seconds = 0.0;
  Tick at = 0;
  int us = 500000;
  for (const auto& t : score.tempo_events) {
    if (t.tick >= end) break;
    if (t.tick > at) {
      seconds += static_cast<double>(t.tick - at) * us / (1e6 * score.ppq);
      at = t.tick;
    }
    us = t.us_per_quarter;
  }
  if (end > at) seconds += static_cast<double>(end - at) * us / (1e6 * score.ppq);
  return seconds;
}

int detect_key_mode(const Score& clip) {
  static constexpr double kMajor[12] = {6.35, 2.23, 3.48, 2.33, 4.38, 4.09,
                                        2.52, 5.19, 2.39, 3.66, 2.29, 2.88};
  static constexpr double kMinor[12] = {6.33, 2.68, 3.52, 5.38, 2.60, 3.53,
                                        2.54, 4.75, 3.98, 2.69, 3.34, 3.17};
  std::array<double, 12> profile{};
  double total = 0.0;
  for (const auto& n : clip.notes) {
    profile[static_cast<std::size_t>(n.pitch % 12)] += static_cast<double>(n.duration);
    total += static_cast<double>(n.duration);
  }
  if (total <= 0.0) return 2;

  auto correlation = [&](const double* ref, int tonic) {
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < 12; ++i) {
      mx += profile[static_cast<std::size_t>(i)];
      my += ref[(i - tonic + 12) % 12];
    }
    mx /= 12.0;
    my /= 12.0;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (int i = 0; i < 12; ++i) {
      const double dx = profile[static_cast<std::size_t>(i)] - mx;
      const double dy = ref[(i - tonic + 12) % 12] - my;
      sxy += dx * dy;
      sxx += dx * dx;
      syy += dy * dy;
    }
    return sxx > 0.0 ? sxy / std::sqrt(sxx * syy) : 0.0;
  };

  double best = -2.0;
  int mode = 0;
  for (int tonic = 0; tonic < 12; ++tonic) {
    const double major = correlation(kMajor, tonic);
    const double minor = correlation(kMinor, tonic);
    if (major > best) {
      best = major;
      mode = 0;
    }
    if (minor > best) {
      best = minor;
      mode = 1;
    }
  }
  return mode;
}

GlobalAttributes extract_global(const Score& clip, const AttributeThresholds& t) {
  if (clip.notes.empty()) return GlobalAttributes::all_na();
  const auto bars = segment_bars(clip);
  if (bars.empty()) return GlobalAttributes::all_na();

  GlobalAttributes g;
  g.instrument = 0;

  int lo = 127, hi = 0;
  for (const auto& n : clip.notes) {
    lo = std::min(lo, n.pitch);
    hi = std::max(hi, n.pitch);
  }
  g.pitch_range = std::min(11, (hi - lo + 11) / 12);

  const double per_bar = static_cast<double>(clip.notes.size()) / static_cast<double>(bars.size());
  g.rhythm_intensity = per_bar < t.rhythm_moderate ? 0 : (per_bar < t.rhythm_intense ? 1 : 2);
  g.bar_bucket = bar_count_bucket(static_cast<int>(bars.size()));

  const TimeSignature sig =
      clip.timesig_events.empty() ? TimeSignature{4, 4} : clip.timesig_events.front().sig;
  g.time_signature = time_signature_code(sig);
  g.key = detect_key_mode(clip);
  const int us = clip.tempo_events.empty() ? 500000 : clip.tempo_events.front().us_per_quarter;
  g.tempo_bucket = tempo_bucket(60'000'000.0 / us, t);
  g.time_bucket = seconds_bucket(score_seconds(clip, bars.back().end_tick));
  return g;
}

std::vector<ChordEstimate> estimate_bar_chords(const Score& clip) {
  const auto bars = segment_bars(clip);
  std::vector<ChordEstimate> out;
  out.reserve(bars.size());
  std::vector<NoteEvent> in_bar;
  for (const auto& b : bars) {
    in_bar.clear();
    for (const auto& n : clip.notes) {
      if (n.onset >= b.end_tick) continue;
      if (n.end() <= b.start_tick) continue;
      NoteEvent clipped = n;
      clipped.onset = std::max(n.onset, b.start_tick);
      clipped.duration = std::min(n.end(), b.end_tick) - clipped.onset;
      in_bar.push_back(clipped);
    }
    out.push_back(estimate_chord(in_bar, b));
  }
  return out;
}

std::vector<ChordLabel> extract_bar_chords(const Score& clip) {
  std::vector<ChordLabel> out;
  for (const auto& e : estimate_bar_chords(clip)) out.push_back(e.label);
  return out;
}

std::string bar_chords_csv(const Score& clip) {
  std::ostringstream out;
  out << "bar_index,chord_id,chord_name,coverage_score\n";
  const auto est = estimate_bar_chords(clip);
  for (std::size_t i = 0; i < est.size(); ++i) {
    const int id = chord_id(est[i].label);
    out << i << ',' << id << ',' << chord_name(id) << ',' << est[i].coverage << '\n';
  }
  return out.str();
}

std::vector<int> extract_bar_chord_ids(const Score& clip) {
  std::vector<int> ids;
  for (const auto& c : extract_bar_chords(clip)) ids.push_back(chord_id(c));
  return ids;
}

PromptSequence build_global_prompt(const GlobalAttributes& g, const Vocab& vocab) {
  PromptSequence p;
  const auto v = g.values();
  for (int a = 0; a < kNumGlobalAttributes; ++a) {
    p.global_tokens.push_back(vocab.global(a, v[static_cast<std::size_t>(a)]));
  }
  p.sep = vocab.sep();
  return p;
}

PromptSequence build_prompt(const GlobalAttributes& g, const std::vector<int>& bar_chords,
                            const Vocab& vocab) {
  if (bar_chords.empty()) throw InvalidArgument("prompt needs at least one bar");
  if (static_cast<int>(bar_chords.size()) > vocab.max_bars()) {
    throw InvalidArgument("prompt has " + std::to_string(bar_chords.size()) +
                          " bars; the limit is " + std::to_string(vocab.max_bars()));
  }
  PromptSequence p = build_global_prompt(g, vocab);
  for (std::size_t i = 0; i < bar_chords.size(); ++i) {
    const int c = bar_chords[i];
    if (c < 0 || c >= kNumChords) throw InvalidArgument("chord id out of range: " + std::to_string(c));
    p.bar_tokens.push_back({vocab.chord(c)});
    p.bar_positions.push_back(static_cast<int>(i));
  }
  return p;
}

PromptSequence build_prompt(const GlobalAttributes& g, const std::vector<ChordLabel>& bars,
                            const Vocab& vocab) {
  std::vector<int> ids;
  for (const auto& c : bars) ids.push_back(chord_id(c));
  return build_prompt(g, ids, vocab);
}

ModelInput assemble_input(const PromptSequence& prompt, const TokenSequence& music, PromptMode mode,
                          const Vocab& vocab, bool append_eos) {
  ModelInput in;
  auto push = [&in](TokenId id, int seq, int bar) {
    in.ids.push_back(id);
    in.seq_pos.push_back(seq);
    in.bar_pos.push_back(bar);
  };
  auto push_prompt = [&] {
    for (TokenId id : prompt.global_tokens) push(id, -1, -1);
    for (std::size_t b = 0; b < prompt.bar_tokens.size(); ++b) {
      // The match head reads each bar's first prompt token.
      in.bar_prompt_index.push_back(in.length());
      for (TokenId id : prompt.bar_tokens[b]) push(id, -1, prompt.bar_positions[b]);
    }
  };
  auto push_music = [&] {
    in.music_begin = in.length();
    for (std::size_t j = 0; j < music.ids.size(); ++j) push(music.ids[j], static_cast<int>(j) + 1, -1);
    if (append_eos) push(vocab.eos(), static_cast<int>(music.ids.size()) + 1, -1);
    in.music_end = in.length();
    for (const auto& [s, e] : music.bar_spans) {
      in.bar_spans.emplace_back(in.music_begin + s, in.music_begin + e);
    }
  };

  if (mode == PromptMode::kGeneration) {
    push_prompt();
    push(prompt.sep, 0, -1);
    push_music();
  } else {
    push_music();
    push(prompt.sep, static_cast<int>(music.ids.size()) + (append_eos ? 2 : 1), -1);
    push_prompt();
  }
  return in;
}

std::string clip_record_to_json(const ClipRecord& record) {
  nlohmann::json g = nlohmann::json::object();
  const auto v = record.global.values();
  for (int a = 0; a < kNumGlobalAttributes; ++a) {
    g[std::string(kGlobalAttributeNames[static_cast<std::size_t>(a)])] = v[static_cast<std::size_t>(a)];
  }
  nlohmann::json j;
  j["global"] = g;
  j["chords"] = record.chords;
  j["source"] = record.source;
  j["bar_offset"] = record.bar_offset;
  return j.dump();
}

ClipRecord clip_record_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ClipRecord r;
    std::array<int, kNumGlobalAttributes> v{};
    for (int a = 0; a < kNumGlobalAttributes; ++a) {
      v[static_cast<std::size_t>(a)] =
          j.at("global").at(std::string(kGlobalAttributeNames[static_cast<std::size_t>(a)])).get<int>();
    }
    r.global = GlobalAttributes::from_values(v);
    r.chords = j.at("chords").get<std::vector<int>>();
    r.source = j.at("source").get<std::string>();
    r.bar_offset = j.at("bar_offset").get<int>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad clip record: ") + e.what());
  }
}

}  // namespace musebar
