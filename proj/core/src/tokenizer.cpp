// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

#include "musebar/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <tuple>

#include "musebar/chords.hpp"

namespace musebar {

Vocab build_vocab(int max_bars) {
  if (max_bars < 1) throw InvalidArgument("max_bars must be at least 1");
  Vocab v;
  v.max_bars_ = max_bars;
  auto add = [&v](std::string name, TokenFamily family, int value) {
    const auto id = static_cast<TokenId>(v.names_.size());
    v.index_.emplace(name, id);
    v.names_.push_back(std::move(name));
    v.kinds_.emplace_back(family, value);
    return id;
  };
  add("[PAD]", TokenFamily::kSpecial, 0);
  add("[BOS]", TokenFamily::kSpecial, 1);
  add("[EOS]", TokenFamily::kSpecial, 2);
  add("[SEP]", TokenFamily::kSpecial, 3);
  v.bar_ = add("Bar", TokenFamily::kBar, 0);
  v.position_ = static_cast<TokenId>(v.names_.size());
  for (int p = 0; p < kNumPositions; ++p) add("Position_" + std::to_string(p), TokenFamily::kPosition, p);
  v.pitch_ = static_cast<TokenId>(v.names_.size());
  for (int k = 0; k < 128; ++k) add("Pitch_" + std::to_string(k), TokenFamily::kPitch, k);
  v.duration_ = static_cast<TokenId>(v.names_.size());
  for (int d = 1; d <= kMaxDurationSteps; ++d) add("Duration_" + std::to_string(d), TokenFamily::kDuration, d);
  v.velocity_ = static_cast<TokenId>(v.names_.size());
  for (int b = 0; b < kNumVelocityBins; ++b) add("Velocity_" + std::to_string(b), TokenFamily::kVelocity, b);
  for (int a = 0; a < kNumGlobalAttributes; ++a) {
    v.global_[static_cast<std::size_t>(a)] = static_cast<TokenId>(v.names_.size());
    for (int x = 0; x < kGlobalAttributeSizes[static_cast<std::size_t>(a)]; ++x) {
      add(std::string(kGlobalAttributeNames[static_cast<std::size_t>(a)]) + "_" + std::to_string(x),
          TokenFamily::kGlobal, a * 100 + x);
    }
  }
  v.chord_ = static_cast<TokenId>(v.names_.size());
  for (int c = 0; c < kNumChords; ++c) add("Chord_" + std::to_string(c), TokenFamily::kChord, c);
  return v;
}

const std::string& Vocab::name(TokenId id) const {
  if (!contains(id)) throw InvalidArgument("token id out of range: " + std::to_string(id));
  return names_[static_cast<std::size_t>(id)];
}

TokenId Vocab::id(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw InvalidArgument("unknown token: " + std::string(name));
  return it->second;
}

TokenFamily Vocab::family(TokenId id) const {
  if (!contains(id)) throw InvalidArgument("token id out of range: " + std::to_string(id));
  return kinds_[static_cast<std::size_t>(id)].first;
}

int Vocab::value(TokenId id) const {
  if (!contains(id)) throw InvalidArgument("token id out of range: " + std::to_string(id));
  const auto [family, value] = kinds_[static_cast<std::size_t>(id)];
  return family == TokenFamily::kGlobal ? value % 100 : value;
}

TokenId Vocab::global(int attribute, int value) const {
  if (attribute < 0 || attribute >= kNumGlobalAttributes || value < 0 ||
      value >= kGlobalAttributeSizes[static_cast<std::size_t>(attribute)]) {
    throw InvalidArgument("global attribute out of range");
  }
  return global_[static_cast<std::size_t>(attribute)] + value;
}

bool Vocab::is_music_token(TokenId id) const {
  if (!contains(id)) return false;
  const auto f = family(id);
  return id == eos() || f == TokenFamily::kBar || f == TokenFamily::kPosition ||
         f == TokenFamily::kPitch || f == TokenFamily::kDuration || f == TokenFamily::kVelocity;
}

bool Vocab::is_prompt_token(TokenId id) const {
  if (!contains(id)) return false;
  const auto f = family(id);
  return f == TokenFamily::kGlobal || f == TokenFamily::kChord;
}

void Vocab::dump(std::ostream& out) const {
  for (int id = 0; id < size(); ++id) out << id << '\t' << names_[static_cast<std::size_t>(id)] << '\n';
}

TokenSequence make_token_sequence(std::vector<TokenId> ids, const Vocab& vocab) {
  TokenSequence seq;
  seq.ids = std::move(ids);
  int end = static_cast<int>(seq.ids.size());
  for (int i = 0; i < static_cast<int>(seq.ids.size()); ++i) {
    if (seq.ids[static_cast<std::size_t>(i)] == vocab.eos()) {
      end = i;
      break;
    }
  }
  for (int i = 0; i < end; ++i) {
    if (seq.ids[static_cast<std::size_t>(i)] != vocab.bar()) continue;
    if (!seq.bar_spans.empty()) seq.bar_spans.back().second = i;
    seq.bar_spans.emplace_back(i, end);
  }
  return seq;
}

namespace {

Tick steps_to_ticks(int steps, int ppq) {
  return static_cast<Tick>(steps) * ppq / kStepsPerQuarter;
}

int ticks_to_steps(Tick ticks, int ppq) {
  return static_cast<int>(std::llround(static_cast<double>(ticks) * kStepsPerQuarter / ppq));
}

struct GridNote {
  int bar;
  int position;
  int pitch;
  int duration;
  int velocity_bin;
  auto key() const { return std::tie(bar, position, pitch, duration, velocity_bin); }
};

}  // namespace

TokenSequence encode(const Score& score, const Vocab& vocab, Warnings* warnings) {
  const auto bars = segment_bars(score, warnings);
  std::vector<GridNote> grid;
  grid.reserve(score.notes.size());
  for (const auto& n : score.notes) {
    auto it = std::upper_bound(bars.begin(), bars.end(), n.onset,
                               [](Tick t, const BarWindow& b) { return t < b.end_tick; });
    if (it == bars.end()) {
      warn(warnings, "note at tick " + std::to_string(n.onset) + " lies past the last bar; dropped");
      continue;
    }
    int bar = it->index;
    const int steps_in_bar = ticks_to_steps(it->length(), score.ppq);
    int pos = ticks_to_steps(n.onset - it->start_tick, score.ppq);
    if (pos >= steps_in_bar) {
      if (bar + 1 < static_cast<int>(bars.size())) {
        ++bar;
        pos = 0;
      } else {
        warn(warnings, "note at tick " + std::to_string(n.onset) + " rounds past the final bar");
        pos = steps_in_bar - 1;
      }
    }
    if (pos >= kNumPositions) {
      warn(warnings, "bar position " + std::to_string(pos) + " clamped");
      pos = kNumPositions - 1;
    }
    int dur = ticks_to_steps(n.duration, score.ppq);
    if (dur > kMaxDurationSteps) {
      warn(warnings, "duration of note at tick " + std::to_string(n.onset) + " clipped");
    }
    dur = std::clamp(dur, 1, kMaxDurationSteps);
    grid.push_back(GridNote{bar, pos, n.pitch, dur, n.velocity / kVelocityBinWidth});
  }
  std::sort(grid.begin(), grid.end(),
            [](const GridNote& a, const GridNote& b) { return a.key() < b.key(); });

  TokenSequence seq;
  std::size_t next = 0;
  for (const auto& b : bars) {
    const int start = static_cast<int>(seq.ids.size());
    seq.ids.push_back(vocab.bar());
    for (; next < grid.size() && grid[next].bar == b.index; ++next) {
      const auto& g = grid[next];
      seq.ids.push_back(vocab.position(g.position));
      seq.ids.push_back(vocab.pitch(g.pitch));
      seq.ids.push_back(vocab.duration(g.duration));
      seq.ids.push_back(vocab.velocity_bin(g.velocity_bin));
    }
    seq.bar_spans.emplace_back(start, static_cast<int>(seq.ids.size()));
  }
  return seq;
}

Score decode(const TokenSequence& tokens, const Vocab& vocab, TimeSignature timesig, int ppq,
             Warnings* warnings) {
  Score score;
  score.ppq = ppq;
  score.tempo_events.push_back(TempoEvent{0, 500000});
  score.timesig_events.push_back(TimeSigEvent{0, timesig});
  const Tick bar_len = bar_length(ppq, timesig);

  int bar = -1;
  int position = 0;
  int pitch = -1;
  int duration = 0;
  auto drop_pending = [&](const char* why) {
    if (pitch >= 0) warn(warnings, std::string("incomplete note dropped: ") + why);
    pitch = -1;
    duration = 0;
  };

  for (const TokenId id : tokens.ids) {
    if (!vocab.contains(id)) throw InvalidArgument("unknown token id " + std::to_string(id));
    if (id == vocab.eos()) break;
    if (id == vocab.pad()) continue;
    const TokenFamily f = vocab.family(id);
    switch (f) {
      case TokenFamily::kBar:
        drop_pending("bar ended");
        ++bar;
        position = 0;
        break;
      case TokenFamily::kPosition:
        drop_pending("new position");
        position = vocab.value(id);
        break;
      case TokenFamily::kPitch:
        drop_pending("pitch without duration");
        pitch = vocab.value(id);
        break;
      case TokenFamily::kDuration:
        if (pitch < 0) {
          warn(warnings, "duration without pitch ignored");
        } else {
          duration = vocab.value(id);
        }
        break;
      case TokenFamily::kVelocity:
        if (pitch < 0 || duration == 0 || bar < 0) {
          drop_pending("velocity without pitch/duration");
          if (bar < 0) warn(warnings, "note before first bar dropped");
          pitch = -1;
          duration = 0;
          break;
        }
        score.notes.push_back(NoteEvent{bar * bar_len + steps_to_ticks(position, ppq),
                                        steps_to_ticks(duration, ppq), pitch,
                                        vocab.value(id) * kVelocityBinWidth + kVelocityBinWidth / 2, 0});
        pitch = -1;
        duration = 0;
        break;
      default:
        throw InvalidArgument("token " + vocab.name(id) + " is not valid in the music region");
    }
  }
  drop_pending("sequence ended");
  std::sort(score.notes.begin(), score.notes.end(), note_less);
  score.end_tick = static_cast<Tick>(bar + 1) * bar_len;
  return score;
}

}  // namespace musebar
