// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

#include "musebar/midi_io.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <iterator>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

namespace musebar {

bool note_less(const NoteEvent& a, const NoteEvent& b) {
  return std::tie(a.onset, a.pitch, a.track, a.duration, a.velocity) <
         std::tie(b.onset, b.pitch, b.track, b.duration, b.velocity);
}

Tick Score::last_note_end() const {
  Tick end = 0;
  for (const auto& n : notes) end = std::max(end, n.end());
  return end;
}

Tick bar_length(int ppq, TimeSignature sig) {
  return static_cast<Tick>(ppq) * 4 * sig.numerator / sig.denominator;
}

namespace {

template <typename Event>
void sort_dedupe_meta(std::vector<Event>& events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.tick < b.tick; });
  std::vector<Event> out;
  for (const auto& e : events) {
    if (!out.empty() && out.back().tick == e.tick) {
      out.back() = e;
    } else {
      out.push_back(e);
    }
  }
  events = std::move(out);
}

}  // namespace

void normalize(Score& score, Warnings* warnings) {
  sort_dedupe_meta(score.tempo_events);
  sort_dedupe_meta(score.timesig_events);
  if (score.tempo_events.empty() || score.tempo_events.front().tick != 0) {
    score.tempo_events.insert(score.tempo_events.begin(), TempoEvent{0, 500000});
  }
  if (score.timesig_events.empty() || score.timesig_events.front().tick != 0) {
    score.timesig_events.insert(score.timesig_events.begin(), TimeSigEvent{0, {4, 4}});
  }

  std::sort(score.notes.begin(), score.notes.end(), note_less);
  // Monophonic-per-pitch: a later onset on a sounding key closes the earlier
  // note at that onset.
  std::map<std::pair<int, int>, std::size_t> last;
  std::vector<bool> keep(score.notes.size(), true);
  for (std::size_t i = 0; i < score.notes.size(); ++i) {
    auto& n = score.notes[i];
    const auto key = std::make_pair(n.track, n.pitch);
    auto it = last.find(key);
    if (it != last.end()) {
      auto& prev = score.notes[it->second];
      if (prev.end() > n.onset) {
        if (n.onset > prev.onset) {
          prev.duration = n.onset - prev.onset;
        } else {
          keep[it->second] = false;
        }
        warn(warnings, "overlapping notes on pitch " + std::to_string(n.pitch) +
                           " at tick " + std::to_string(n.onset) + " repaired");
      }
    }
    last[key] = i;
  }
  std::vector<NoteEvent> repaired;
  repaired.reserve(score.notes.size());
  for (std::size_t i = 0; i < score.notes.size(); ++i) {
    if (keep[i]) repaired.push_back(score.notes[i]);
  }
  score.notes = std::move(repaired);
  score.end_tick = std::max(score.end_tick, score.last_note_end());
}

// ---------------------------------------------------------------------------
// Reading

namespace {

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::size_t begin, std::size_t end)
      : bytes_(bytes), pos_(begin), end_(end) {}

  bool done() const { return pos_ >= end_; }
  std::size_t pos() const { return pos_; }

  std::uint8_t u8() {
    if (pos_ >= end_) throw ParseError("unexpected end of data", pos_);
    return bytes_[pos_++];
  }
  std::uint8_t peek() const {
    if (pos_ >= end_) throw ParseError("unexpected end of data", pos_);
    return bytes_[pos_];
  }
  std::uint32_t be(int n) {
    std::uint32_t v = 0;
    for (int i = 0; i < n; ++i) v = (v << 8) | u8();
    return v;
  }
  std::uint32_t vlq() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      const std::uint8_t b = u8();
      v = (v << 7) | (b & 0x7f);
      if ((b & 0x80) == 0) return v;
    }
    throw ParseError("variable-length quantity longer than 4 bytes", pos_);
  }
  void skip(std::size_t n) {
    if (n > end_ - pos_) throw ParseError("length runs past end of chunk", pos_);
    pos_ += n;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    const std::size_t at = pos_;
    skip(n);
    return bytes_.subspan(at, n);
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_;
  std::size_t end_;
};

struct Sounding {
  Tick onset;
  int velocity;
};

void parse_track(ByteReader& r, int track_index, Score& score, Tick& track_end,
                 Warnings* warnings) {
  Tick tick = 0;
  std::uint8_t status = 0;
  std::map<std::pair<int, int>, Sounding> sounding;  // (channel, pitch)

  auto close = [&](int channel, int pitch, Tick at) {
    auto it = sounding.find({channel, pitch});
    if (it == sounding.end()) return;
    if (at > it->second.onset) {
      score.notes.push_back(NoteEvent{it->second.onset, at - it->second.onset, pitch,
                                      it->second.velocity, track_index});
    }
    sounding.erase(it);
  };

  while (!r.done()) {
    tick += r.vlq();
    std::uint8_t b = r.peek();
    if (b & 0x80) {
      r.u8();
      if (b < 0xf0) status = b;  // meta/sysex cancel running status
    } else {
      if (status == 0) throw ParseError("data byte without running status", r.pos());
      b = status;
    }

    if (b == 0xff) {
      const std::uint8_t type = r.u8();
      const std::uint32_t len = r.vlq();
      auto data = r.take(len);
      status = 0;
      if (type == 0x51 && len == 3) {
        const int us = (data[0] << 16) | (data[1] << 8) | data[2];
        if (us > 0) score.tempo_events.push_back(TempoEvent{tick, us});
      } else if (type == 0x58 && len >= 2) {
        if (data[1] > 7) throw ParseError("time signature denominator exponent out of range", r.pos());
        if (data[0] > 0) {
          score.timesig_events.push_back(
              TimeSigEvent{tick, {data[0], 1 << data[1]}});
        }
      } else if (type == 0x2f) {
        break;
      }
      continue;
    }
    if (b == 0xf0 || b == 0xf7) {
      r.skip(r.vlq());
      status = 0;
      continue;
    }
    if (b >= 0xf0) throw ParseError("unexpected system message in track", r.pos() - 1);

    const int kind = b & 0xf0;
    const int channel = b & 0x0f;
    const int data_bytes = (kind == 0xc0 || kind == 0xd0) ? 1 : 2;
    const int d1 = r.u8() & 0x7f;
    const int d2 = data_bytes == 2 ? (r.u8() & 0x7f) : 0;

    if (kind == 0x90 && d2 > 0) {
      if (sounding.count({channel, d1})) {
        warn(warnings, "re-struck pitch " + std::to_string(d1) + " at tick " +
                           std::to_string(tick) + " closes the sounding note");
        close(channel, d1, tick);
      }
      sounding[{channel, d1}] = Sounding{tick, d2};
    } else if (kind == 0x80 || kind == 0x90) {
      close(channel, d1, tick);
    }
  }

  if (!sounding.empty()) {
    warn(warnings, std::to_string(sounding.size()) + " note(s) in track " +
                       std::to_string(track_index) + " closed at end of track");
    std::vector<std::pair<int, int>> keys;
    for (const auto& [k, _] : sounding) keys.push_back(k);
    for (const auto& [ch, p] : keys) close(ch, p, tick);
  }
  track_end = tick;
}

}  // namespace

Score parse_smf(std::span<const std::uint8_t> bytes, Warnings* warnings) {
  ByteReader head(bytes, 0, bytes.size());
  if (bytes.size() < 14) throw ParseError("file too short for MThd header", bytes.size());
  if (!std::equal(bytes.begin(), bytes.begin() + 4, "MThd")) {
    throw ParseError("missing MThd chunk", 0);
  }
  head.skip(4);
  const std::uint32_t header_len = head.be(4);
  if (header_len < 6) throw ParseError("MThd length " + std::to_string(header_len) + " < 6", 4);
  if (header_len > bytes.size() - 8) throw ParseError("MThd length runs past end of file", 4);
  const int format = static_cast<int>(head.be(2));
  const int ntracks = static_cast<int>(head.be(2));
  const std::uint32_t division = head.be(2);
  if (format == 2) throw UnsupportedFormatError("SMF format 2 is not supported");
  if (format > 2) throw ParseError("unknown SMF format " + std::to_string(format), 8);
  if (division & 0x8000) throw UnsupportedFormatError("SMPTE time division is not supported");
  if (division == 0) throw ParseError("zero ticks per quarter", 12);

  Score score;
  score.ppq = static_cast<int>(division);
  std::size_t pos = 8 + header_len;
  int track_index = 0;
  Tick end = 0;
  while (pos < bytes.size() && track_index < ntracks) {
    if (bytes.size() - pos < 8) throw ParseError("truncated chunk header", pos);
    const bool is_track = std::equal(bytes.begin() + pos, bytes.begin() + pos + 4, "MTrk");
    ByteReader len_reader(bytes, pos + 4, pos + 8);
    const std::uint32_t len = len_reader.be(4);
    if (len > bytes.size() - pos - 8) {
      throw ParseError("chunk length " + std::to_string(len) + " runs past end of file", pos + 4);
    }
    if (is_track) {
      ByteReader r(bytes, pos + 8, pos + 8 + len);
      Tick track_end = 0;
      parse_track(r, track_index, score, track_end, warnings);
      end = std::max(end, track_end);
      ++track_index;
    }
    pos += 8 + len;
  }
  if (track_index < ntracks) {
    warn(warnings, "header declares " + std::to_string(ntracks) + " tracks, found " +
                       std::to_string(track_index));
  }
  score.end_tick = end;
  normalize(score, warnings);
  return score;
}

Score read_smf_file(const std::string& path, Warnings* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_smf(bytes, warnings);
}

// ---------------------------------------------------------------------------
// Writing

namespace {

void put_be(std::vector<std::uint8_t>& out, std::uint32_t v, int n) {
  for (int i = n - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_vlq(std::vector<std::uint8_t>& out, std::uint32_t v) {
  std::uint8_t buf[5];
  int n = 0;
  buf[n++] = v & 0x7f;
  while (v >>= 7) buf[n++] = static_cast<std::uint8_t>((v & 0x7f) | 0x80);
  while (n > 0) out.push_back(buf[--n]);
}

struct TrackEvent {
  Tick tick;
  int order;  // meta < note-off < note-on at equal ticks
  std::vector<std::uint8_t> data;
};

int log2_exact(int v) {
  int e = 0;
  while ((1 << e) < v) ++e;
  return e;
}

}  // namespace

std::vector<std::uint8_t> write_smf(const Score& input) {
  Score score = input;
  normalize(score);

  int max_track = 0;
  for (const auto& n : score.notes) max_track = std::max(max_track, n.track);
  std::vector<std::vector<TrackEvent>> tracks(static_cast<std::size_t>(max_track) + 1);

  for (const auto& t : score.tempo_events) {
    const auto us = static_cast<std::uint32_t>(t.us_per_quarter);
    tracks[0].push_back({t.tick, 0,
                         {0xff, 0x51, 0x03, static_cast<std::uint8_t>(us >> 16),
                          static_cast<std::uint8_t>(us >> 8), static_cast<std::uint8_t>(us)}});
  }
  for (const auto& ts : score.timesig_events) {
    tracks[0].push_back({ts.tick, 0,
                         {0xff, 0x58, 0x04, static_cast<std::uint8_t>(ts.sig.numerator),
                          static_cast<std::uint8_t>(log2_exact(ts.sig.denominator)), 24, 8}});
  }
  for (const auto& n : score.notes) {
    auto& dst = tracks[static_cast<std::size_t>(n.track)];
    dst.push_back({n.onset, 2,
                   {0x90, static_cast<std::uint8_t>(n.pitch), static_cast<std::uint8_t>(n.velocity)}});
    dst.push_back({n.end(), 1, {0x80, static_cast<std::uint8_t>(n.pitch), 0}});
  }

  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'M', 'T', 'h', 'd'});
  put_be(out, 6, 4);
  put_be(out, 1, 2);
  put_be(out, static_cast<std::uint32_t>(tracks.size()), 2);
  put_be(out, static_cast<std::uint32_t>(score.ppq), 2);

  for (auto& events : tracks) {
    std::stable_sort(events.begin(), events.end(), [](const TrackEvent& a, const TrackEvent& b) {
      return std::tie(a.tick, a.order) < std::tie(b.tick, b.order);
    });
    std::vector<std::uint8_t> body;
    Tick now = 0;
    for (const auto& e : events) {
      put_vlq(body, static_cast<std::uint32_t>(e.tick - now));
      now = e.tick;
      body.insert(body.end(), e.data.begin(), e.data.end());
    }
    put_vlq(body, static_cast<std::uint32_t>(std::max<Tick>(0, score.end_tick - now)));
    body.insert(body.end(), {0xff, 0x2f, 0x00});
    out.insert(out.end(), {'M', 'T', 'r', 'k'});
    put_be(out, static_cast<std::uint32_t>(body.size()), 4);
    out.insert(out.end(), body.begin(), body.end());
  }
  return out;
}

void write_smf_file(const Score& score, const std::string& path) {
  const auto bytes = write_smf(score);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// ---------------------------------------------------------------------------
// Bars

std::vector<BarWindow> segment_bars(const Score& score, Warnings* warnings) {
  // Every onset must fall inside a window; note tails only count through
  // end_tick, which normalize() raises to the last note end.
  Tick end = score.end_tick;
  for (const auto& n : score.notes) end = std::max(end, n.onset + 1);
  std::vector<TimeSigEvent> changes = score.timesig_events;
  std::stable_sort(changes.begin(), changes.end(),
                   [](const auto& a, const auto& b) { return a.tick < b.tick; });

  TimeSignature sig{4, 4};
  std::size_t next = 0;
  while (next < changes.size() && changes[next].tick == 0) sig = changes[next++].sig;

  std::vector<BarWindow> bars;
  Tick start = 0;
  while (start < end) {
    // Apply every change at or before this boundary; late ones are snapped.
    while (next < changes.size() && changes[next].tick <= start) {
      if (changes[next].tick < start) {
        warn(warnings, "time signature change at tick " + std::to_string(changes[next].tick) +
                           " moved to bar boundary " + std::to_string(start));
      }
      sig = changes[next++].sig;
    }
    const Tick len = bar_length(score.ppq, sig);
    if (len <= 0) throw InvalidArgument("time signature yields empty bar");
    bars.push_back(BarWindow{static_cast<int>(bars.size()), start, start + len, sig});
    start += len;
  }
  return bars;
}

// ---------------------------------------------------------------------------
// Note lists

std::vector<NoteEvent> read_note_list(std::istream& in) {
  std::vector<NoteEvent> notes;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    NoteEvent n;
    if (!(fields >> n.onset)) continue;
    if (!(fields >> n.duration >> n.pitch >> n.velocity)) {
      throw InvalidArgument("note list line " + std::to_string(line_no) +
                            ": expected `onset duration pitch velocity`");
    }
    if (n.duration < 1 || n.pitch < 0 || n.pitch > 127 || n.velocity < 1 || n.velocity > 127 ||
        n.onset < 0) {
      throw InvalidArgument("note list line " + std::to_string(line_no) + ": value out of range");
    }
    notes.push_back(n);
  }
  return notes;
}

void write_note_list(std::ostream& out, std::span<const NoteEvent> notes) {
  for (const auto& n : notes) {
    out << n.onset << ' ' << n.duration << ' ' << n.pitch << ' ' << n.velocity << '\n';
  }
}

}  // namespace musebar
