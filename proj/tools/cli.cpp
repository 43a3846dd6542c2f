// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "musebar/chords.hpp"
#include "musebar/dataset.hpp"
#include "musebar/decoder.hpp"
#include "musebar/eval.hpp"
#include "musebar/synth.hpp"
#include "musebar/trainer.hpp"

namespace musebar::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr const char* kVersion = "0.1.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

// Resolved option values of a subcommand, flags and config merged.
json resolved_config(const CLI::App& sub) {
  json j;
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config") continue;
    std::string key = name;
    std::replace(key.begin(), key.end(), '-', '_');
    if (opt->get_type_size() == 0) {
      j[key] = opt->count() > 0;
    } else if (opt->count() > 0) {
      j[key] = opt->results().back();
    } else {
      j[key] = opt->get_default_str();
    }
  }
  return j;
}

void write_manifest(const std::string& out_dir, const std::string& command, const json& config,
                    const std::vector<std::string>& inputs) {
  fs::create_directories(out_dir);
  json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["config"] = config;
  m["config_hash"] = fnv1a_hex(config.dump());
  m["inputs"] = inputs;
  std::ofstream f((fs::path(out_dir) / "manifest.json").string());
  if (!f) throw Error("cannot write manifest in " + out_dir);
  f << m.dump(2) << '\n';
}

std::string json_value_to_arg(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ",") + json_value_to_arg(x);
    return s;
  }
  return v.dump();
}

// Turns `--config FILE` into flags placed before the user's own flags, so
// that flags given on the command line win.
std::vector<std::string> expand_config(const std::vector<std::string>& args, CLI::App& app) {
  if (args.empty()) return args;
  std::string path;
  std::vector<std::string> rest;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (path.empty()) return args;
  CLI::App* sub = app.get_subcommand_no_throw(args[0]);
  if (sub == nullptr) return args;
  std::ifstream f(path);
  if (!f) throw UsageError("cannot read config file " + path);
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!cfg.is_object()) throw UsageError("config file must hold a JSON object");
  std::vector<std::string> out{args[0]};
  for (const auto& [key, value] : cfg.items()) {
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    const CLI::Option* opt = sub->get_option_no_throw("--" + flag);
    if (opt == nullptr || flag == "help" || flag == "config") {
      throw UsageError("unknown config key '" + key + "' for " + args[0]);
    }
    if (opt->get_type_size() == 0) {
      if (value.is_boolean() && value.get<bool>()) out.push_back("--" + flag);
    } else {
      out.push_back("--" + flag);
      out.push_back(json_value_to_arg(value));
    }
  }
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

std::vector<int> parse_chords(const std::string& text) {
  std::vector<int> ids;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    const auto id = chord_id_from_name(item);
    if (!id) {
      std::string valid;
      for (const auto& n : all_chord_names()) valid += (valid.empty() ? "" : " ") + n;
      throw UsageError("unknown chord name '" + item + "'; valid names: " + valid);
    }
    ids.push_back(*id);
  }
  if (ids.empty()) throw UsageError("--chords needs at least one chord name");
  return ids;
}

GlobalAttributes parse_global(const std::string& text) {
  auto v = GlobalAttributes::all_na().values();
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw UsageError("--global expects Name=value pairs, got '" + item + "'");
    const std::string name = item.substr(0, eq);
    const auto it = std::find(kGlobalAttributeNames.begin(), kGlobalAttributeNames.end(), name);
    if (it == kGlobalAttributeNames.end()) throw UsageError("unknown global attribute '" + name + "'");
    const auto a = static_cast<std::size_t>(it - kGlobalAttributeNames.begin());
    int value = 0;
    try {
      value = std::stoi(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw UsageError("bad value for " + name);
    }
    if (value < 0 || value >= kGlobalAttributeSizes[a]) throw UsageError("value out of range for " + name);
    v[a] = value;
  }
  return GlobalAttributes::from_values(v);
}

Score read_any_score(const std::string& path, int ppq, Warnings* warnings) {
  const auto ext = fs::path(path).extension().string();
  if (ext == ".mid" || ext == ".midi") return read_smf_file(path, warnings);
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path);
  Score s;
  s.ppq = ppq;
  s.notes = read_note_list(f);
  normalize(s, warnings);
  return s;
}

void print_warnings(const Warnings& w, std::ostream& err, std::size_t limit = 20) {
  for (std::size_t i = 0; i < w.size() && i < limit; ++i) err << "warning: " << w[i] << '\n';
  if (w.size() > limit) err << "warning: ... " << (w.size() - limit) << " more\n";
}

struct TrainOptions {
  std::string dataset, out, init;
  int epochs = 1;
  int batch_size = 8;
  double lr = 2e-4;
  int warmup = 200;
  double beta1 = 0.9, beta2 = 0.999;
  double grad_clip = 1.0;
  double lambda = 1e3, eta = 0.05;
  std::uint64_t seed = 1;
  int limit = 0;
  ModelConfig model;
};

void add_train_options(CLI::App* sub, TrainOptions& o, Stage stage) {
  sub->add_option("--dataset", o.dataset, "Dataset directory (make-dataset output)")->required();
  sub->add_option("--out", o.out, "Output directory")->required();
  sub->add_option("--epochs", o.epochs, "Epochs");
  sub->add_option("--batch-size", o.batch_size, "Clips per optimizer step");
  sub->add_option("--lr", o.lr, "Peak learning rate");
  sub->add_option("--warmup", o.warmup, "Warm-up steps");
  sub->add_option("--beta1", o.beta1, "Adam beta1");
  sub->add_option("--beta2", o.beta2, "Adam beta2");
  sub->add_option("--grad-clip", o.grad_clip, "Global gradient-norm clip");
  sub->add_option("--seed", o.seed, "Seed");
  sub->add_option("--limit", o.limit, "Use only the first N training clips (0 = all)");
  if (stage == Stage::kBase) {
    sub->add_option("--layers", o.model.layers, "Transformer layers");
    sub->add_option("--heads", o.model.heads, "Attention heads");
    sub->add_option("--d-model", o.model.d_model, "Model width");
    sub->add_option("--d-ffn", o.model.d_ffn, "Feed-forward width");
    sub->add_option("--max-seq-len", o.model.max_seq_len, "Maximum sequence length");
    sub->add_option("--lora-rank", o.model.lora_rank, "Adapter rank");
    sub->add_option("--lora-alpha", o.model.lora_alpha, "Adapter alpha");
  } else {
    sub->add_option("--init", o.init, "Checkpoint to start from")->required();
  }
  if (stage == Stage::kFineTune) {
    sub->add_option("--lambda", o.lambda, "Counterfactual loss weight (0 disables it)");
    sub->add_option("--eta", o.eta, "Counterfactual margin");
  }
}

int run_train(const TrainOptions& o, Stage stage, const json& config, std::ostream& out, std::ostream& err) {
  const Vocab vocab = build_vocab();
  Dataset data = load_dataset(o.dataset, vocab);
  if (o.limit > 0 && static_cast<int>(data.train.size()) > o.limit) {
    data.train.resize(static_cast<std::size_t>(o.limit));
  }
  ModelConfig model = o.model;
  Params params;
  std::vector<std::string> inputs{o.dataset};
  if (stage == Stage::kBase) {
    model.vocab_size = vocab.size();
    model.max_bars = vocab.max_bars();
    model.seed = o.seed;
    model.validate();
    params = init_params<float>(model, o.seed);
  } else {
    auto loaded = load_checkpoint(o.init);
    params = std::move(loaded.first);
    model = loaded.second;
    inputs.push_back(o.init);
    if (model.vocab_size != vocab.size()) throw Error("checkpoint vocabulary does not match");
  }
  write_manifest(o.out, stage == Stage::kBase ? "pretrain" : stage == Stage::kPreAdaptation ? "train-pa" : "finetune",
                 config, inputs);

  TrainConfig tc;
  tc.stage = stage;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch_size;
  tc.peak_lr = o.lr;
  tc.warmup_steps = o.warmup;
  tc.beta1 = o.beta1;
  tc.beta2 = o.beta2;
  tc.grad_clip = o.grad_clip;
  tc.lambda = stage == Stage::kFineTune ? o.lambda : 0.0;
  tc.eta = o.eta;
  tc.seed = o.seed;
  tc.out_dir = o.out;
  out << "training " << stage_name(stage) << " on " << data.train.size() << " clips, " << parameter_count(model)
      << " parameters\n";
  const auto result = run_stage(tc, model, vocab, data.train, data.valid, params, {}, [&out](const EpochSummary& e) {
    out << "epoch " << e.epoch << " loss " << e.mean_loss;
    if (e.pa_accuracy >= 0.0) out << " held-out match accuracy " << e.pa_accuracy;
    out << " (" << std::fixed << std::setprecision(1) << e.seconds << " s)\n" << std::defaultfloat;
  });
  const std::string final_path = (fs::path(o.out) / ("stage-" + stage_name(stage) + "-final.mbck")).string();
  save_checkpoint(params, model, final_path);
  out << "wrote " << final_path << '\n';
  (void)err;
  (void)result;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bar-level chord-controllable symbolic music generation", "musebar"};
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  auto add_config = [](CLI::App* sub) {
    sub->add_option("--config", "JSON file with option values; flags override it");
  };

  // synth-gen
  SynthConfig synth = SynthConfig::defaults();
  double min_percent = 0.1;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth-gen", "Generate the synthetic piano corpus");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--songs", synth.n_songs, "Number of songs");
  synth_cmd->add_option("--bars", synth.bars_per_song, "Bars per song");
  synth_cmd->add_option("--persistence", synth.persistence, "Probability a bar repeats the previous chord");
  synth_cmd->add_option("--noise", synth.noise_rate, "Probability of a passing tone per bar");
  synth_cmd->add_option("--tempo-min", synth.tempo_min_bpm, "Lowest tempo (BPM)");
  synth_cmd->add_option("--tempo-max", synth.tempo_max_bpm, "Highest tempo (BPM)");
  synth_cmd->add_option("--min-percent", min_percent, "Drop chords rarer than this share (percent) from the prior");
  synth_cmd->add_option("--seed", synth.seed, "Seed");
  add_config(synth_cmd);

  // ingest
  std::string ingest_in, ingest_out;
  int ingest_ppq = 480;
  auto* ingest_cmd = app.add_subcommand("ingest", "Parse MIDI files into attribute and token records");
  ingest_cmd->add_option("--input", ingest_in, "A .mid file, note list or directory")->required();
  ingest_cmd->add_option("--out", ingest_out, "Output directory")->required();
  ingest_cmd->add_option("--ppq", ingest_ppq, "Ticks per quarter for note lists");
  add_config(ingest_cmd);

  // make-dataset
  std::string corpus_dir, dataset_out;
  DatasetConfig dc;
  auto* dataset_cmd = app.add_subcommand("make-dataset", "Cut clips, label and tokenize, split by song");
  dataset_cmd->add_option("--corpus", corpus_dir, "Directory of .mid songs")->required();
  dataset_cmd->add_option("--out", dataset_out, "Output directory")->required();
  dataset_cmd->add_option("--clips-per-song", dc.clips_per_song, "Clips per song");
  dataset_cmd->add_option("--clip-bars", dc.clip_bars, "Bars per clip");
  dataset_cmd->add_option("--seed", dc.seed, "Seed");
  add_config(dataset_cmd);

  // training stages
  TrainOptions base_opt, pa_opt, ft_opt;
  base_opt.epochs = 20;
  pa_opt.epochs = 10;
  ft_opt.epochs = 10;
  auto* pretrain_cmd = app.add_subcommand("pretrain", "Foundation pretraining with global prompts");
  add_train_options(pretrain_cmd, base_opt, Stage::kBase);
  add_config(pretrain_cmd);
  auto* pa_cmd = app.add_subcommand("train-pa", "Pre-adaptation on corrupted bar prompts");
  add_train_options(pa_cmd, pa_opt, Stage::kPreAdaptation);
  add_config(pa_cmd);
  auto* ft_cmd = app.add_subcommand("finetune", "Bar-level fine-tuning with the counterfactual loss");
  add_train_options(ft_cmd, ft_opt, Stage::kFineTune);
  add_config(ft_cmd);

  // generate
  GenerationRequest req;
  std::string gen_ckpt, gen_chords, gen_global, gen_out, gen_name = "generated", gen_dataset, gen_split = "test";
  int gen_clips = 0;
  auto* gen_cmd = app.add_subcommand("generate", "Generate music for a chord progression");
  gen_cmd->add_option("--checkpoint", gen_ckpt, "Model checkpoint")->required();
  gen_cmd->add_option("--out", gen_out, "Output directory")->required();
  gen_cmd->add_option("--chords", gen_chords, "Comma-separated chord names, e.g. \"C:,G:,A:m,F:\"");
  gen_cmd->add_option("--global", gen_global, "Global attributes as Name=value pairs, e.g. \"Key=0,Tempo=1\"");
  gen_cmd->add_option("--dataset", gen_dataset, "Prompt with the clips of a dataset split instead of --chords");
  gen_cmd->add_option("--split", gen_split, "Dataset split: train, valid or test");
  gen_cmd->add_option("--clips", gen_clips, "Number of dataset clips (0 = all)");
  gen_cmd->add_option("--name", gen_name, "Output file stem for --chords");
  gen_cmd->add_option("--k", req.k, "Sampling attempts per bar");
  gen_cmd->add_option("--top-k", req.top_k, "Candidates kept at each step");
  gen_cmd->add_option("--temperature", req.temperature, "Sampling temperature");
  gen_cmd->add_option("--seed", req.seed, "Seed");
  gen_cmd->add_option("--max-tokens-per-bar", req.max_tokens_per_bar, "Token cap per bar");
  add_config(gen_cmd);

  // evaluate
  std::string eval_results, eval_out;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a directory of generated files");
  eval_cmd->add_option("--results", eval_results, "Directory written by generate")->required();
  eval_cmd->add_option("--out", eval_out, "Directory for report.json (defaults to --results)");
  add_config(eval_cmd);

  // inspect-chords
  std::string inspect_in;
  int inspect_ppq = 480;
  bool inspect_json = false;
  bool inspect_csv = false;
  auto* inspect_cmd = app.add_subcommand("inspect-chords", "Print the chord detected in every bar");
  inspect_cmd->add_option("--input", inspect_in, "A .mid file or a note list")->required();
  inspect_cmd->add_option("--ppq", inspect_ppq, "Ticks per quarter for note lists");
  inspect_cmd->add_flag("--json", inspect_json, "Emit JSON");
  inspect_cmd->add_flag("--csv", inspect_csv, "Emit bar_index,chord_id,chord_name,coverage_score");
  add_config(inspect_cmd);

  std::vector<std::string> args;
  try {
    args = expand_config(raw_args, app);
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    if (CLI::App* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front()) {
      err << sub->help();
    } else {
      err << app.help();
    }
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const json config = resolved_config(*sub);
  err << "config " << sub->get_name() << ' ' << config.dump() << '\n';

  try {
    if (sub == synth_cmd) {
      SynthConfig c = SynthConfig::defaults(min_percent);
      c.n_songs = synth.n_songs;
      c.bars_per_song = synth.bars_per_song;
      c.persistence = synth.persistence;
      c.noise_rate = synth.noise_rate;
      c.tempo_min_bpm = synth.tempo_min_bpm;
      c.tempo_max_bpm = synth.tempo_max_bpm;
      c.seed = synth.seed;
      try {
        c.validate();
      } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
      }
      write_manifest(synth_out, "synth-gen", config, {});
      const auto songs = gen_corpus(c);
      const auto paths = write_corpus(songs, synth_out);
      out << "wrote " << paths.size() << " songs to " << synth_out << '\n';
      return kExitOk;
    }

    if (sub == ingest_cmd) {
      const Vocab vocab = build_vocab();
      std::vector<std::string> files;
      if (fs::is_directory(ingest_in)) {
        for (const auto& e : fs::directory_iterator(ingest_in)) {
          if (e.is_regular_file()) files.push_back(e.path().string());
        }
        std::sort(files.begin(), files.end());
      } else {
        files.push_back(ingest_in);
      }
      write_manifest(ingest_out, "ingest", config, files);
      int written = 0;
      for (const auto& path : files) {
        const auto ext = fs::path(path).extension().string();
        if (ext == ".json") continue;
        Warnings w;
        Score s;
        try {
          s = read_any_score(path, ingest_ppq, &w);
        } catch (const Error& e) {
          err << "skipping " << path << ": " << e.what() << '\n';
          continue;
        }
        const auto bars = segment_bars(s, &w);
        const TokenSequence tokens = encode(s, vocab, &w);
        json rec;
        rec["source"] = fs::path(path).filename().string();
        rec["bars"] = bars.size();
        rec["global"] = json::parse(clip_record_to_json(ClipRecord{extract_global(s), {}, "", 0}))["global"];
        const auto chords = extract_bar_chord_ids(s);
        rec["chords"] = chords;
        std::vector<std::string> names;
        for (int c : chords) names.push_back(chord_name(c));
        rec["chord_names"] = names;
        rec["tokens"] = tokens.ids;
        rec["warnings"] = w;
        std::ofstream((fs::path(ingest_out) / (fs::path(path).stem().string() + ".json")).string())
            << rec.dump() << '\n';
        print_warnings(w, err);
        ++written;
      }
      std::ofstream vf((fs::path(ingest_out) / "vocab.tsv").string());
      vocab.dump(vf);
      out << "ingested " << written << " file(s) into " << ingest_out << '\n';
      return kExitOk;
    }

    if (sub == dataset_cmd) {
      const Vocab vocab = build_vocab();
      Warnings w;
      write_manifest(dataset_out, "make-dataset", config, {corpus_dir});
      const Dataset d = build_dataset_from_dir(corpus_dir, dc, vocab, &w);
      save_dataset(d, dataset_out);
      print_warnings(w, err);
      out << "clips: train " << d.train.size() << ", valid " << d.valid.size() << ", test " << d.test.size()
          << " (songs " << d.splits.train.size() << "/" << d.splits.valid.size() << "/" << d.splits.test.size()
          << ")\n";
      return kExitOk;
    }

    if (sub == pretrain_cmd) return run_train(base_opt, Stage::kBase, config, out, err);
    if (sub == pa_cmd) return run_train(pa_opt, Stage::kPreAdaptation, config, out, err);
    if (sub == ft_cmd) return run_train(ft_opt, Stage::kFineTune, config, out, err);

    if (sub == gen_cmd) {
      const Vocab vocab = build_vocab();
      std::vector<std::pair<std::string, GenerationRequest>> jobs;
      if (!gen_dataset.empty()) {
        if (!gen_chords.empty()) throw UsageError("--chords and --dataset are exclusive");
        const Dataset d = load_dataset(gen_dataset, vocab);
        const auto& split = gen_split == "train" ? d.train : gen_split == "valid" ? d.valid : d.test;
        if (gen_split != "train" && gen_split != "valid" && gen_split != "test") {
          throw UsageError("--split must be train, valid or test");
        }
        const std::size_t n = gen_clips > 0 ? std::min(split.size(), static_cast<std::size_t>(gen_clips)) : split.size();
        for (std::size_t i = 0; i < n; ++i) {
          GenerationRequest r = req;
          r.global = split[i].record.global;
          r.chords = split[i].record.chords;
          r.seed = Rng::mix(req.seed + i);
          std::ostringstream stem;
          stem << "clip-" << std::setw(5) << std::setfill('0') << i;
          jobs.emplace_back(stem.str(), r);
        }
      } else {
        if (gen_chords.empty()) throw UsageError("generate needs --chords or --dataset");
        GenerationRequest r = req;
        r.chords = parse_chords(gen_chords);
        r.global = parse_global(gen_global);
        jobs.emplace_back(gen_name, r);
      }
      for (const auto& [stem, r] : jobs) {
        try {
          r.validate(vocab.max_bars());
        } catch (const InvalidArgument& e) {
          throw UsageError(e.what());
        }
      }
      std::vector<std::string> inputs{gen_ckpt};
      if (!gen_dataset.empty()) inputs.push_back(gen_dataset);
      write_manifest(gen_out, "generate", config, inputs);
      auto [params, model] = load_checkpoint(gen_ckpt);
      long matched = 0, total = 0;
      for (const auto& [stem, r] : jobs) {
        const auto result = generate(params, model, vocab, r);
        write_generation(result, r, vocab, (fs::path(gen_out) / stem).string());
        for (const auto& b : result.bars) matched += b.matched ? 1 : 0;
        total += static_cast<long>(r.chords.size());
        print_warnings(result.warnings, err, 5);
      }
      out << "generated " << jobs.size() << " file(s), " << matched << "/" << total << " bars on target\n";
      return kExitOk;
    }

    if (sub == eval_cmd) {
      if (!fs::is_directory(eval_results)) throw UsageError("not a directory: " + eval_results);
      std::vector<std::string> sidecars;
      for (const auto& e : fs::directory_iterator(eval_results)) {
        const auto p = e.path();
        if (p.extension() == ".json" && p.filename() != "manifest.json" && p.filename() != "report.json" &&
            fs::exists(fs::path(p).replace_extension(".mid"))) {
          sidecars.push_back(p.string());
        }
      }
      std::sort(sidecars.begin(), sidecars.end());
      if (sidecars.empty()) throw Error("no generated files in " + eval_results);
      EvalReport report;
      std::array<int, kNumGlobalAttributes> hits{};
      std::map<int, std::pair<long, long>> per_k;
      std::map<int, std::pair<double, long>> attempts_k;
      long matched = 0, total = 0;
      for (const auto& path : sidecars) {
        std::ifstream f(path);
        const auto j = nlohmann::json::parse(f);
        const auto chords = j.at("chords").get<std::vector<int>>();
        std::array<int, kNumGlobalAttributes> v{};
        for (int a = 0; a < kNumGlobalAttributes; ++a) {
          v[static_cast<std::size_t>(a)] =
              j.at("global_attrs").at(std::string(kGlobalAttributeNames[static_cast<std::size_t>(a)])).get<int>();
        }
        const Score score = read_smf_file(fs::path(path).replace_extension(".mid").string());
        const int m = count_matched_bars(score, chords);
        matched += m;
        total += static_cast<long>(chords.size());
        const auto g = global_matches(score, GlobalAttributes::from_values(v));
        for (std::size_t a = 0; a < g.size(); ++a) hits[a] += g[a] ? 1 : 0;
        const int k = j.at("k").get<int>();
        per_k[k].first += m;
        per_k[k].second += static_cast<long>(chords.size());
        for (const auto& b : j.at("per_bar")) {
          attempts_k[k].first += b.at("attempts").get<int>();
          attempts_k[k].second += 1;
        }
      }
      report.n_clips = static_cast<int>(sidecars.size());
      report.n_bars = static_cast<int>(total);
      report.chord_accuracy = total == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(total);
      double sum = 0.0;
      for (std::size_t a = 0; a < hits.size(); ++a) {
        report.global_accuracy[a] = static_cast<double>(hits[a]) / static_cast<double>(sidecars.size());
        sum += report.global_accuracy[a];
      }
      report.average_global_accuracy = sum / kNumGlobalAttributes;
      for (const auto& [k, mt] : per_k) {
        KBreakdown b;
        b.k = k;
        b.n_bars = static_cast<int>(mt.second);
        b.chord_accuracy = mt.second == 0 ? 0.0 : static_cast<double>(mt.first) / static_cast<double>(mt.second);
        const auto& at = attempts_k[k];
        b.mean_attempts = at.second == 0 ? 0.0 : at.first / static_cast<double>(at.second);
        report.per_k.push_back(b);
      }
      const std::string dest = eval_out.empty() ? eval_results : eval_out;
      write_manifest(dest, "evaluate", config, {eval_results});
      std::ofstream((fs::path(dest) / "report.json").string()) << report.to_json() << '\n';
      out << report.to_table();
      return kExitOk;
    }

    if (sub == inspect_cmd) {
      Warnings w;
      const Score s = read_any_score(inspect_in, inspect_ppq, &w);
      if (inspect_csv) {
        out << bar_chords_csv(s);
        print_warnings(w, err);
        return kExitOk;
      }
      const auto est = estimate_bar_chords(s);
      json rows = json::array();
      for (std::size_t i = 0; i < est.size(); ++i) {
        const ChordEstimate& e = est[i];
        if (inspect_json) {
          rows.push_back({{"bar", i}, {"chord", chord_name(e.label)}, {"coverage", e.coverage}, {"score", e.score}});
        } else {
          out << std::setw(4) << i << "  " << std::left << std::setw(8) << chord_name(e.label) << std::right
              << "  coverage " << std::fixed << std::setprecision(3) << e.coverage << std::defaultfloat << '\n';
        }
      }
      if (inspect_json) out << rows.dump(2) << '\n';
      print_warnings(w, err);
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace musebar::cli
