// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

#include "musebar/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

namespace musebar {

std::vector<Example> clips_from_song(const Score& song, int song_id, const std::string& source,
                                     const DatasetConfig& config, const Vocab& vocab, Warnings* warnings) {
  Rng rng = Rng(config.seed).fork(static_cast<std::uint64_t>(song_id));
  std::vector<Example> out;
  for (auto& clip : extract_clips(song, config.clips_per_song, config.clip_bars, rng, warnings)) {
    Example e;
    e.song = song_id;
    e.record.global = extract_global(clip.score);
    e.record.chords = extract_bar_chord_ids(clip.score);
    e.record.chords.resize(static_cast<std::size_t>(config.clip_bars), kNoChordId);
    e.record.source = source;
    e.record.bar_offset = clip.bar_offset;
    e.music = encode(clip.score, vocab, warnings);
    out.push_back(std::move(e));
  }
  return out;
}

Dataset build_dataset(const std::vector<Score>& songs, const std::vector<std::string>& sources,
                      const DatasetConfig& config, const Vocab& vocab, Warnings* warnings) {
  if (songs.size() != sources.size()) throw InvalidArgument("one source name per song is required");
  std::vector<int> ids(songs.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  Dataset d;
  d.splits = make_splits(ids, config.ratios, config.seed);
  const std::set<int> valid(d.splits.valid.begin(), d.splits.valid.end());
  const std::set<int> test(d.splits.test.begin(), d.splits.test.end());
  for (std::size_t i = 0; i < songs.size(); ++i) {
    const int id = static_cast<int>(i);
    auto clips = clips_from_song(songs[i], id, sources[i], config, vocab, warnings);
    auto& dest = valid.count(id) ? d.valid : test.count(id) ? d.test : d.train;
    for (auto& c : clips) dest.push_back(std::move(c));
  }
  return d;
}

Dataset build_dataset_from_dir(const std::string& dir, const DatasetConfig& config, const Vocab& vocab,
                               Warnings* warnings) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error("not a directory: " + dir);
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension().string();
    if (entry.is_regular_file() && (ext == ".mid" || ext == ".midi")) paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw Error("no .mid files in " + dir);
  std::vector<Score> songs;
  std::vector<std::string> sources;
  for (const auto& p : paths) {
    songs.push_back(read_smf_file(p, warnings));
    sources.push_back(fs::path(p).filename().string());
  }
  return build_dataset(songs, sources, config, vocab, warnings);
}

std::string example_to_json(const Example& example) {
  auto j = nlohmann::ordered_json::parse(clip_record_to_json(example.record));
  j["song"] = example.song;
  j["tokens"] = example.music.ids;
  return j.dump();
}

Example example_from_json(const std::string& line, const Vocab& vocab) {
  Example e;
  e.record = clip_record_from_json(line);
  try {
    const auto j = nlohmann::json::parse(line);
    e.song = j.at("song").get<int>();
    auto ids = j.at("tokens").get<std::vector<TokenId>>();
    for (TokenId id : ids) {
      if (!vocab.contains(id) || !vocab.is_music_token(id)) throw Error("non-music token in dataset line");
    }
    e.music = make_token_sequence(std::move(ids), vocab);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(std::string("bad dataset line: ") + ex.what());
  }
  return e;
}

namespace {

void write_split(const std::vector<Example>& split, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  for (const auto& e : split) f << example_to_json(e) << '\n';
}

std::vector<Example> read_split(const std::string& path, const Vocab& vocab) {
  std::ifstream f(path);
  if (!f) throw Error("cannot read " + path);
  std::vector<Example> out;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty()) out.push_back(example_from_json(line, vocab));
  }
  return out;
}

std::vector<int> song_ids(const std::vector<Example>& split) {
  std::set<int> s;
  for (const auto& e : split) s.insert(e.song);
  return {s.begin(), s.end()};
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_split(dataset.train, (fs::path(dir) / "train.jsonl").string());
  write_split(dataset.valid, (fs::path(dir) / "valid.jsonl").string());
  write_split(dataset.test, (fs::path(dir) / "test.jsonl").string());
}

Dataset load_dataset(const std::string& dir, const Vocab& vocab) {
  namespace fs = std::filesystem;
  Dataset d;
  d.train = read_split((fs::path(dir) / "train.jsonl").string(), vocab);
  d.valid = read_split((fs::path(dir) / "valid.jsonl").string(), vocab);
  d.test = read_split((fs::path(dir) / "test.jsonl").string(), vocab);
  d.splits = Splits{song_ids(d.train), song_ids(d.valid), song_ids(d.test)};
  return d;
}

}  // namespace musebar
