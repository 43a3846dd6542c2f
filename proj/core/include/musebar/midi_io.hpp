// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

// Standard MIDI File reading/writing and bar segmentation.
//
// Only the subset needed for piano scores is modelled: notes, tempo and time
// signature. Everything else in a file is skipped on read.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "musebar/error.hpp"

namespace musebar {

using Tick = std::int64_t;

struct NoteEvent {
  Tick onset = 0;
  Tick duration = 1;
  int pitch = 60;
  int velocity = 64;
  int track = 0;

  Tick end() const { return onset + duration; }
  friend bool operator==(const NoteEvent&, const NoteEvent&) = default;
};

// Orders by (onset, pitch), then by the remaining fields for a total order.
bool note_less(const NoteEvent& a, const NoteEvent& b);

struct TempoEvent {
  Tick tick = 0;
  int us_per_quarter = 500000;

  double bpm() const { return 60'000'000.0 / us_per_quarter; }
  friend bool operator==(const TempoEvent&, const TempoEvent&) = default;
};

struct TimeSignature {
  int numerator = 4;
  int denominator = 4;
  friend bool operator==(const TimeSignature&, const TimeSignature&) = default;
};

struct TimeSigEvent {
  Tick tick = 0;
  TimeSignature sig;
  friend bool operator==(const TimeSigEvent&, const TimeSigEvent&) = default;
};

struct Score {
  int ppq = 480;
  std::vector<TempoEvent> tempo_events;
  std::vector<TimeSigEvent> timesig_events;
  std::vector<NoteEvent> notes;
  // Explicit length; normalize() raises it to the last note end. Lets a clip
  // carry trailing silent bars.
  Tick end_tick = 0;

  Tick last_note_end() const;
  friend bool operator==(const Score&, const Score&) = default;
};

struct BarWindow {
  int index = 0;
  Tick start_tick = 0;
  Tick end_tick = 0;
  TimeSignature timesig;

  Tick length() const { return end_tick - start_tick; }
  friend bool operator==(const BarWindow&, const BarWindow&) = default;
};

// Ticks in one bar of `sig`.
Tick bar_length(int ppq, TimeSignature sig);

// Sorts events, inserts 120 BPM / 4/4 at tick 0 when missing, collapses
// duplicate same-tick meta events (last wins), repairs overlapping same-pitch
// notes within a track and raises end_tick to cover all notes.
void normalize(Score& score, Warnings* warnings = nullptr);

// Reads SMF format 0 or 1. Throws ParseError or UnsupportedFormatError.
Score parse_smf(std::span<const std::uint8_t> bytes, Warnings* warnings = nullptr);

// Emits a format-1 file: track 0 carries tempo/time signature (and notes with
// track == 0), notes with track == k go to chunk k.
std::vector<std::uint8_t> write_smf(const Score& score);

Score read_smf_file(const std::string& path, Warnings* warnings = nullptr);
void write_smf_file(const Score& score, const std::string& path);

// Contiguous bar windows from tick 0 covering end_tick and every onset (for a
// normalized score: up to the last note end). A time
// signature change that does not fall on a bar boundary is deferred to the
// next boundary and reported.
std::vector<BarWindow> segment_bars(const Score& score, Warnings* warnings = nullptr);

// Plain-text note list, one `onset duration pitch velocity` per line; `#`
// starts a comment.
std::vector<NoteEvent> read_note_list(std::istream& in);
void write_note_list(std::ostream& out, std::span<const NoteEvent> notes);

}  // namespace musebar
