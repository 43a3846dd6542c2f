// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

#include "musebar/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>

#include "musebar/chords.hpp"

namespace musebar {
namespace {

void check_paired(const std::vector<GenerationResult>& results, const std::vector<GenerationRequest>& requests) {
  if (results.size() != requests.size()) {
    throw InvalidArgument("results (" + std::to_string(results.size()) + ") and requests (" +
                          std::to_string(requests.size()) + ") differ in length");
  }
}

}  // namespace

int count_matched_bars(const Score& score, const std::vector<int>& targets) {
  const auto realized = extract_bar_chord_ids(score);
  int matched = 0;
  for (std::size_t b = 0; b < targets.size() && b < realized.size(); ++b) {
    if (realized[b] == targets[b]) ++matched;
  }
  return matched;
}

std::array<bool, kNumGlobalAttributes> global_matches(const Score& score, const GlobalAttributes& prompted) {
  const auto measured = extract_global(score).values();
  const auto wanted = prompted.values();
  std::array<bool, kNumGlobalAttributes> out{};
  for (int a = 0; a < kNumGlobalAttributes; ++a) {
    const auto i = static_cast<std::size_t>(a);
    out[i] = wanted[i] == na_value(a) || measured[i] == wanted[i];
  }
  return out;
}

double chord_accuracy(const std::vector<GenerationResult>& results, const std::vector<GenerationRequest>& requests,
                      const Vocab& vocab) {
  check_paired(results, requests);
  long total = 0, matched = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    total += static_cast<long>(requests[i].chords.size());
    matched += count_matched_bars(decode(results[i].tokens, vocab), requests[i].chords);
  }
  return total == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(total);
}

GlobalAccuracy global_attribute_accuracy(const std::vector<GenerationResult>& results,
                                         const std::vector<GenerationRequest>& requests, const Vocab& vocab) {
  check_paired(results, requests);
  GlobalAccuracy acc;
  if (results.empty()) return acc;
  std::array<int, kNumGlobalAttributes> hits{};
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto m = global_matches(render(results[i], requests[i], vocab), requests[i].global);
    for (std::size_t a = 0; a < m.size(); ++a) hits[a] += m[a] ? 1 : 0;
  }
  double sum = 0.0;
  for (std::size_t a = 0; a < hits.size(); ++a) {
    acc.per_attribute[a] = static_cast<double>(hits[a]) / static_cast<double>(results.size());
    sum += acc.per_attribute[a];
  }
  acc.average = sum / kNumGlobalAttributes;
  return acc;
}

EvalReport make_report(const std::vector<GenerationResult>& results, const std::vector<GenerationRequest>& requests,
                       const Vocab& vocab) {
  EvalReport r;
  r.chord_accuracy = chord_accuracy(results, requests, vocab);
  const auto g = global_attribute_accuracy(results, requests, vocab);
  r.global_accuracy = g.per_attribute;
  r.average_global_accuracy = g.average;
  r.n_clips = static_cast<int>(results.size());
  for (const auto& q : requests) r.n_bars += static_cast<int>(q.chords.size());
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["chord_accuracy"] = chord_accuracy;
  nlohmann::ordered_json g;
  for (int a = 0; a < kNumGlobalAttributes; ++a) {
    g[std::string(kGlobalAttributeNames[static_cast<std::size_t>(a)])] = global_accuracy[static_cast<std::size_t>(a)];
  }
  j["global_attribute_accuracy"] = g;
  j["average_global_accuracy"] = average_global_accuracy;
  j["n_bars"] = n_bars;
  j["n_clips"] = n_clips;
  nlohmann::json ks = nlohmann::json::array();
  for (const auto& k : per_k) {
    ks.push_back({{"k", k.k},
                  {"chord_accuracy", k.chord_accuracy},
                  {"n_bars", k.n_bars},
                  {"mean_attempts", k.mean_attempts},
                  {"seconds", k.seconds}});
  }
  j["per_k"] = ks;
  return j.dump(2);
}

std::string EvalReport::to_table() const {
  std::vector<std::pair<std::string, std::string>> rows;
  auto pct = [](double x) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << 100.0 * x;
    return s.str();
  };
  rows.emplace_back("chord accuracy (%)", pct(chord_accuracy));
  for (int a = 0; a < kNumGlobalAttributes; ++a) {
    rows.emplace_back(std::string(kGlobalAttributeNames[static_cast<std::size_t>(a)]) + " accuracy (%)",
                      pct(global_accuracy[static_cast<std::size_t>(a)]));
  }
  rows.emplace_back("average global accuracy (%)", pct(average_global_accuracy));
  rows.emplace_back("bars", std::to_string(n_bars));
  rows.emplace_back("clips", std::to_string(n_clips));
  for (const auto& k : per_k) {
    rows.emplace_back("K=" + std::to_string(k.k) + " chord accuracy (%)", pct(k.chord_accuracy));
  }
  std::size_t width = 0;
  for (const auto& [name, value] : rows) width = std::max(width, name.size());
  std::ostringstream out;
  for (const auto& [name, value] : rows) {
    out << std::left << std::setw(static_cast<int>(width) + 2) << name << std::right << std::setw(10) << value
        << '\n';
  }
  return out.str();
}

Splits make_splits(const std::vector<int>& song_ids, const std::array<double, 3>& ratios, std::uint64_t seed) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9 || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0) {
    throw InvalidArgument("split ratios must be non-negative and sum to 1");
  }
  std::vector<int> ids = song_ids;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  Rng rng(seed);
  for (std::size_t i = ids.size(); i > 1; --i) {
    std::swap(ids[i - 1], ids[rng.uniform_int(i)]);
  }
  const auto n = static_cast<double>(ids.size());
  const auto n_train = static_cast<std::size_t>(std::lround(n * ratios[0]));
  const auto n_valid = std::min(ids.size() - n_train, static_cast<std::size_t>(std::lround(n * ratios[1])));
  Splits s;
  s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.valid.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                 ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), ids.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.valid.begin(), s.valid.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

Score slice_bars(const Score& score, const std::vector<BarWindow>& bars, int first, int count) {
  if (first < 0 || count < 1 || first + count > static_cast<int>(bars.size())) {
    throw InvalidArgument("bar slice out of range");
  }
  const Tick start = bars[static_cast<std::size_t>(first)].start_tick;
  const Tick end = bars[static_cast<std::size_t>(first + count - 1)].end_tick;
  Score clip;
  clip.ppq = score.ppq;
  TempoEvent tempo{0, 500000};
  for (const auto& t : score.tempo_events) {
    if (t.tick <= start) tempo.us_per_quarter = t.us_per_quarter;
    else if (t.tick < end) clip.tempo_events.push_back(TempoEvent{t.tick - start, t.us_per_quarter});
  }
  clip.tempo_events.insert(clip.tempo_events.begin(), tempo);
  clip.timesig_events.push_back(TimeSigEvent{0, bars[static_cast<std::size_t>(first)].timesig});
  for (const auto& ts : score.timesig_events) {
    if (ts.tick > start && ts.tick < end) clip.timesig_events.push_back(TimeSigEvent{ts.tick - start, ts.sig});
  }
  for (const auto& n : score.notes) {
    if (n.onset < start || n.onset >= end) continue;
    NoteEvent c = n;
    c.onset -= start;
    c.duration = std::min(n.end(), end) - n.onset;
    clip.notes.push_back(c);
  }
  clip.end_tick = end - start;
  return clip;
}

std::vector<Clip> extract_clips(const Score& score, int clips_per_song, int clip_bars, Rng& rng,
                                Warnings* warnings) {
  if (clips_per_song < 1 || clip_bars < 1) throw InvalidArgument("clip count and length must be positive");
  const auto bars = segment_bars(score, warnings);
  const int n_bars = static_cast<int>(bars.size());
  const int starts = n_bars - clip_bars + 1;
  if (starts < 1) {
    warn(warnings, "score has " + std::to_string(n_bars) + " bars, fewer than one " + std::to_string(clip_bars) +
                       "-bar clip");
    return {};
  }
  int n = clips_per_song;
  if (starts < n) {
    warn(warnings, "only " + std::to_string(starts) + " distinct clip start(s) available");
    n = starts;
  }
  std::vector<int> order(static_cast<std::size_t>(starts));
  for (int i = 0; i < starts; ++i) order[static_cast<std::size_t>(i)] = i;
  for (int i = 0; i < n; ++i) {
    const int j = i + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(starts - i)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  std::vector<int> chosen(order.begin(), order.begin() + n);
  std::sort(chosen.begin(), chosen.end());
  std::vector<Clip> clips;
  for (int first : chosen) clips.push_back(Clip{slice_bars(score, bars, first, clip_bars), first});
  return clips;
}

}  // namespace musebar
