// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion. Criteria 6-10 run the
// desk-scale pipeline (synthetic corpus, three training stages, four model
// variants, constrained decoding) twice with identical seeds.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "musebar/attributes.hpp"
#include "musebar/chords.hpp"
#include "musebar/dataset.hpp"
#include "musebar/decoder.hpp"
#include "musebar/eval.hpp"
#include "musebar/losses.hpp"
#include "musebar/midi_io.hpp"
#include "musebar/model.hpp"
#include "musebar/synth.hpp"
#include "musebar/tokenizer.hpp"
#include "musebar/trainer.hpp"

namespace fs = std::filesystem;
using namespace musebar;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

struct Verdict {
  int id;
  bool pass;
  std::string what;
  std::string detail;
};

std::vector<Verdict> verdicts;

void report(int id, bool pass, const std::string& what, const std::string& detail) {
  verdicts.push_back({id, pass, what, detail});
  std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << ": " << what << " | " << detail << std::endl;
}

void log(const std::string& s) { std::cerr << "[acceptance] " << s << std::endl; }

// ---------------------------------------------------------------------------
// 1. Tokenizer round trip against a hand-written grid quantizer.

struct QNote {
  Tick onset, duration;
  int pitch, velocity;
  auto operator<=>(const QNote&) const = default;
};

void criterion_tokenizer() {
  const auto t0 = Clock::now();
  const Vocab vocab = build_vocab();
  Rng rng(101);
  int exact = 0;
  std::string first_failure;
  for (int trial = 0; trial < 50; ++trial) {
    const int bars = rng.uniform_range(1, 24);
    // Distinct pitches keep the quantized notes free of same-key overlaps.
    std::vector<int> pitches(128);
    for (int p = 0; p < 128; ++p) pitches[static_cast<std::size_t>(p)] = p;
    for (int i = 127; i > 0; --i) std::swap(pitches[static_cast<std::size_t>(i)], pitches[rng.uniform_int(i + 1)]);
    const int n = rng.uniform_range(0, 60);
    Score s;
    s.ppq = 480;
    std::vector<QNote> want;
    for (int i = 0; i < n; ++i) {
      NoteEvent e;
      e.onset = rng.uniform_range(0, bars * 1920 - 1);
      e.duration = rng.uniform_range(1, 16 * 480);
      e.pitch = pitches[static_cast<std::size_t>(i)];
      e.velocity = rng.uniform_range(1, 127);
      s.notes.push_back(e);
      const Tick q_on = static_cast<Tick>(std::floor(static_cast<double>(e.onset) / 120.0 + 0.5)) * 120;
      const Tick q_dur =
          std::clamp<Tick>(static_cast<Tick>(std::floor(static_cast<double>(e.duration) / 120.0 + 0.5)), 1, 64) * 120;
      want.push_back({q_on, q_dur, e.pitch, (e.velocity / 4) * 4 + 2});
    }
    normalize(s);
    const Score back = decode(encode(s, vocab), vocab);
    std::vector<QNote> got;
    for (const auto& e : back.notes) got.push_back({e.onset, e.duration, e.pitch, e.velocity});
    std::sort(want.begin(), want.end());
    std::sort(got.begin(), got.end());
    if (got == want) {
      ++exact;
    } else if (first_failure.empty()) {
      first_failure = " first mismatch at trial " + std::to_string(trial);
    }
  }
  const double secs = seconds_since(t0);
  report(1, exact == 50 && secs < 10.0, "tokenizer round trip equals grid quantization",
         std::to_string(exact) + "/50 exact (need 50), " + fmt("%.3f", secs) + " s (limit 10 s)" + first_failure);
}

// ---------------------------------------------------------------------------
// 2. Chord extractor on block and broken chords.

constexpr std::array<std::array<int, 4>, 8> kIntervals{{
    {0, 4, 7, -1},   // maj
    {0, 3, 7, -1},   // m
    {0, 4, 8, -1},   // +
    {0, 3, 6, -1},   // dim
    {0, 4, 7, 10},   // 7
    {0, 4, 7, 11},   // maj7
    {0, 3, 7, 10},   // m7
    {0, 3, 6, 10},   // m7b5
}};

std::vector<int> chord_pitches(int id, int base) {
  std::vector<int> out;
  const int root = id / 8;
  for (int iv : kIntervals[static_cast<std::size_t>(id % 8)]) {
    if (iv >= 0) out.push_back(base + root + iv);
  }
  return out;
}

Score one_bar(const std::vector<NoteEvent>& notes) {
  Score s;
  s.notes = notes;
  normalize(s);
  s.end_tick = 1920;
  return s;
}

void criterion_chords() {
  int block_ok = 0;
  for (int id = 0; id < 96; ++id) {
    std::vector<NoteEvent> notes;
    for (int p : chord_pitches(id, 48)) notes.push_back(NoteEvent{0, 1920, p, 90, 0});
    block_ok += extract_bar_chord_ids(one_bar(notes)).at(0) == id ? 1 : 0;
  }

  // Broken-chord figures: ascending, descending from the top, Alberti-style and
  // a two-octave sweep, in 8th or 16th notes, with the root in the bass.
  int broken_ok = 0, broken_total = 0;
  for (int id = 0; id < 96; ++id) {
    const auto tones = chord_pitches(id, 48);
    const int n = static_cast<int>(tones.size());
    std::vector<std::vector<int>> figures;
    figures.push_back({0, 1, 2, n - 1});
    figures.push_back({0, n - 1, n - 2, 1});
    figures.push_back(n == 3 ? std::vector<int>{0, 2, 1, 2} : std::vector<int>{0, 2, 1, 3});
    figures.push_back({0, 1, 2, 3 % n, 0 + 100, 1 + 100, 2 + 100, (3 % n) + 100});
    for (const auto& fig : figures) {
      for (Tick step : {Tick{240}, Tick{120}}) {
        std::vector<NoteEvent> notes;
        std::size_t k = 0;
        for (Tick t = 0; t < 1920; t += step, ++k) {
          const int f = fig[k % fig.size()];
          const int pitch = tones[static_cast<std::size_t>(f % 100)] + (f >= 100 ? 12 : 0);
          notes.push_back(NoteEvent{t, step, pitch, 80, 0});
        }
        ++broken_total;
        broken_ok += extract_bar_chord_ids(one_bar(notes)).at(0) == id ? 1 : 0;
      }
    }
  }

  struct Vector {
    std::vector<int> pitches;
    std::string want;
  };
  const std::vector<Vector> appendix{{{57, 60, 64}, "A:m"}, {{57, 60, 64, 67}, "A:m7"},
                                     {{50, 53, 57, 60}, "D:m7"}, {{53, 57, 60}, "F:"}};
  int appendix_ok = 0;
  std::string got_names;
  for (const auto& v : appendix) {
    std::vector<NoteEvent> notes;
    for (int p : v.pitches) notes.push_back(NoteEvent{0, 1920, p, 80, 0});
    const std::string got = chord_name(extract_bar_chord_ids(one_bar(notes)).at(0));
    appendix_ok += got == v.want ? 1 : 0;
    got_names += (got_names.empty() ? "" : ",") + got;
  }
  const double broken = static_cast<double>(broken_ok) / broken_total;
  report(2, block_ok == 96 && broken >= 0.95 && appendix_ok == 4, "chord extractor oracle equivalence",
         "block " + std::to_string(block_ok) + "/96 (need 96), broken " + std::to_string(broken_ok) + "/" +
             std::to_string(broken_total) + " = " + fmt("%.4f", broken) + " (need >= 0.95), appendix vectors " +
             std::to_string(appendix_ok) + "/4 [" + got_names + "]");
}

// ---------------------------------------------------------------------------
// 3. Finite differences on a 1-layer, d_model = 8 model.

ModelConfig tiny(int vocab) {
  ModelConfig c;
  c.layers = 1;
  c.d_model = 8;
  c.heads = 2;
  c.d_ffn = 16;
  c.vocab_size = vocab;
  c.max_seq_len = 64;
  c.max_bars = 8;
  c.lora_rank = 2;
  c.lora_alpha = 4.0;
  return c;
}

void criterion_gradients() {
  using P = ParamsT<double>;
  const auto t0 = Clock::now();
  const int vocab = 29;
  const ModelConfig c = tiny(vocab);
  Rng rng(303);
  ModelInput in;
  for (int b = 0; b < 4; ++b) {
    in.bar_prompt_index.push_back(in.length());
    in.ids.push_back(rng.uniform_range(0, vocab - 1));
    in.seq_pos.push_back(-1);
    in.bar_pos.push_back(b);
  }
  in.ids.push_back(rng.uniform_range(0, vocab - 1));
  in.seq_pos.push_back(0);
  in.bar_pos.push_back(-1);
  in.music_begin = in.length();
  for (int j = 0; j < 14; ++j) {
    in.ids.push_back(rng.uniform_range(0, vocab - 1));
    in.seq_pos.push_back(j + 1);
    in.bar_pos.push_back(-1);
  }
  in.music_end = in.length();
  std::vector<double> w_match;
  for (int b = 0; b < 4; ++b) w_match.push_back(rng.normal());

  P p = init_params<double>(c, 7);
  Rng noise(8);
  p.visit([&](const std::string&, MatrixT<double>& m, ParamGroup) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += 0.3 * noise.normal();
  });
  const TrainableSet all = TrainableSet::everything(vocab);
  auto objective = [&](P* grads) {
    const LmTargets lt = lm_targets(in);
    ForwardOptions o;
    o.compute_match = true;
    o.logit_rows = lt.rows;
    ForwardCache<double> cache;
    const auto out = forward(p, c, in, o, &cache);
    MatrixT<double> dl;
    double loss = nll_sum<double>(out.logits, lt.targets, grads ? &dl : nullptr);
    for (std::size_t b = 0; b < w_match.size(); ++b) loss += w_match[b] * out.match_logits[b];
    if (grads) backward(p, c, cache, dl, w_match, all, *grads);
    return loss;
  };
  P g = p.zeros_like();
  objective(&g);
  std::vector<std::tuple<std::string, MatrixT<double>*, MatrixT<double>*>> cs;
  std::vector<MatrixT<double>*> gs;
  g.visit([&](const std::string&, MatrixT<double>& m, ParamGroup) { gs.push_back(&m); });
  std::size_t i = 0;
  p.visit([&](const std::string& name, MatrixT<double>& m, ParamGroup) { cs.emplace_back(name, &m, gs[i++]); });

  const double h = 1e-3;
  double worst = 0.0;
  int bad = 0;
  const int n_coords = 240;
  for (int k = 0; k < n_coords; ++k) {
    auto& [name, param, grad] = cs[rng.uniform_int(cs.size())];
    auto idx = static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(param->size())));
    if (name == "tok_emb") {
      idx = in.ids[rng.uniform_int(in.ids.size())] * param->cols() +
            rng.uniform_range(0, static_cast<int>(param->cols()) - 1);
    }
    double& x = param->data()[idx];
    const double saved = x;
    x = saved + h;
    const double up = objective(nullptr);
    x = saved - h;
    const double down = objective(nullptr);
    x = saved;
    const double numeric = (up - down) / (2 * h);
    const double analytic = grad->data()[idx];
    const double rel = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-4});
    worst = std::max(worst, rel);
    bad += rel < 1e-3 ? 0 : 1;
  }
  const double secs = seconds_since(t0);
  report(3, bad == 0 && secs < 60.0, "central differences match analytic gradients",
         std::to_string(n_coords) + " coordinates, worst relative error " + fmt("%.3e", worst) +
             " (limit 1e-3), " + fmt("%.2f", secs) + " s (limit 60 s)");
}

// ---------------------------------------------------------------------------
// 4. Loss values.

void criterion_losses() {
  const double tol = 1e-6;
  const double cf1 = loss_cf(1.0, 1.2, 0.05), cf2 = loss_cf(1.0, 1.0, 0.05), cf3 = loss_cf(1.1, 1.0, 0.05);
  const int b = 16;
  CorruptionPlan plan;
  plan.replacement.assign(b, -1);
  plan.labels.assign(b, 1);
  for (int i = 0; i < b; i += 3) {
    plan.labels[static_cast<std::size_t>(i)] = 0;
    plan.replacement[static_cast<std::size_t>(i)] = 5;
    plan.modified.push_back(i);
  }
  const std::vector<double> half(b, 0.5);
  const double pa = loss_pa(half, plan);
  const int n = 37;
  const MatrixT<float> logits = MatrixT<float>::Zero(n, 436);
  std::vector<TokenId> targets;
  for (int r = 0; r < n; ++r) targets.push_back((r * 97) % 436);
  const double bft = loss_bft(logits, targets);
  const double e1 = std::abs(cf1 - 0.0), e2 = std::abs(cf2 - 0.05), e3 = std::abs(cf3 - 0.15);
  const double e4 = std::abs(pa - b * std::log(2.0)), e5 = std::abs(bft - n * std::log(436.0));
  const double worst = std::max({e1, e2, e3, e4, e5});
  report(4, worst <= tol, "loss unit values",
         "cf(0.2)=" + fmt("%.9f", cf1) + " cf(0)=" + fmt("%.9f", cf2) + " cf(-0.1)=" + fmt("%.9f", cf3) +
             " pa=" + fmt("%.9f", pa) + " vs 16 ln2, bft=" + fmt("%.9f", bft) + " vs 37 ln436; worst error " +
             fmt("%.2e", worst) + " (limit 1e-6)");
}

// ---------------------------------------------------------------------------
// 5. Fresh adapters leave the base forward unchanged.

void criterion_adapter_identity() {
  const Vocab vocab = build_vocab();
  ModelConfig c;
  c.vocab_size = vocab.size();
  const Params p = init_params<float>(c, 5);
  SynthConfig sc = SynthConfig::defaults();
  sc.n_songs = 4;
  sc.bars_per_song = 16;
  double worst = 0.0;
  for (const auto& song : gen_corpus(sc)) {
    const TokenSequence music = encode(song.score, vocab);
    const ModelInput in =
        assemble_input(build_prompt(extract_global(song.score), song.chords, vocab), music, PromptMode::kGeneration,
                       vocab, true);
    ForwardOptions with, without;
    without.use_adapters = false;
    with.compute_match = without.compute_match = true;
    const auto a = forward(p, c, in, with);
    const auto b = forward(p, c, in, without);
    worst = std::max(worst, static_cast<double>((a.logits - b.logits).cwiseAbs().maxCoeff()));
    for (std::size_t k = 0; k < a.match_logits.size(); ++k) {
      worst = std::max(worst, static_cast<double>(std::abs(a.match_logits[k] - b.match_logits[k])));
    }
  }
  report(5, worst <= 1e-6, "zero-initialised adapters reproduce the base forward",
         "max |adapted - base| = " + fmt("%.3e", worst) + " over 4 clips (limit 1e-6)");
}

// ---------------------------------------------------------------------------
// 6-10. Desk-scale pipeline.

struct Hyper {
  int songs = 700;
  int bars_per_song = 32;
  int clips_per_song = 3;
  int clip_bars = 16;
  std::uint64_t corpus_seed = 1;
  std::uint64_t split_seed = 1;
  std::uint64_t model_seed = 1;

  int base_epochs = 4;
  double base_lr = 1e-3;
  int pa_epochs = 2;
  double pa_lr = 1e-3;
  int ft_epochs = 3;
  double ft_lr = 3e-3;
  double lambda = 100.0;
  double eta = 0.05;
  int warmup = 200;
  int batch = 8;

  // Test clips [eval_first, eval_first + eval_clips), 16 bars each.
  int eval_first = 32;
  int eval_clips = 64;
  std::uint64_t eval_seed = 7000;
};

struct Outcome {
  double pa_accuracy = 0.0;
  std::map<std::string, double> acc15;  // variant -> chord accuracy at K = 15
  std::map<int, double> acc_k;          // full model
  std::map<int, double> attempts_k;
  std::map<int, int> max_attempts_k;
  std::map<int, double> seconds_k;
  int eval_bars = 0;
  std::size_t clips = 0;
  double seconds = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["pa_accuracy"] = pa_accuracy;
    j["acc15"] = acc15;
    for (const auto& [k, v] : acc_k) j["acc_k"][std::to_string(k)] = v;
    for (const auto& [k, v] : attempts_k) j["attempts_k"][std::to_string(k)] = v;
    for (const auto& [k, v] : seconds_k) j["seconds_k"][std::to_string(k)] = v;
    j["eval_bars"] = eval_bars;
    j["clips"] = clips;
    j["seconds"] = seconds;
    return j;
  }
};

const std::vector<std::string> kVariants{"BFT", "BFT+PA", "BFT+CF", "BFT+PA+CF"};

struct KRun {
  double accuracy = 0.0;
  double mean_attempts = 0.0;
  int max_attempts = 0;
  double seconds = 0.0;
  int bars = 0;
};

KRun evaluate_k(const Params& p, const ModelConfig& mc, const Vocab& vocab, const std::vector<Example>& test,
                const Hyper& h, int k) {
  std::vector<GenerationResult> results;
  std::vector<GenerationRequest> requests;
  KRun run;
  long attempts = 0;
  const auto t0 = Clock::now();
  for (int i = 0; i < h.eval_clips; ++i) {
    const Example& ex = test[static_cast<std::size_t>(h.eval_first + i)];
    GenerationRequest r;
    r.global = ex.record.global;
    r.chords = ex.record.chords;
    r.k = k;
    r.seed = h.eval_seed + static_cast<std::uint64_t>(i);
    results.push_back(generate(p, mc, vocab, r));
    requests.push_back(r);
    for (const auto& b : results.back().bars) {
      attempts += b.attempts;
      run.max_attempts = std::max(run.max_attempts, b.attempts);
    }
    run.bars += static_cast<int>(r.chords.size());
  }
  run.seconds = seconds_since(t0);
  run.accuracy = chord_accuracy(results, requests, vocab);
  run.mean_attempts = static_cast<double>(attempts) / run.bars;
  return run;
}

Outcome run_pipeline(const std::string& dir, const Hyper& h) {
  const auto t0 = Clock::now();
  fs::create_directories(dir);
  const Vocab vocab = build_vocab();
  Outcome out;

  SynthConfig sc = SynthConfig::defaults();
  sc.n_songs = h.songs;
  sc.bars_per_song = h.bars_per_song;
  sc.seed = h.corpus_seed;
  const auto songs = gen_corpus(sc);
  std::vector<Score> scores;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < songs.size(); ++i) {
    scores.push_back(songs[i].score);
    names.push_back("song-" + std::to_string(i));
  }
  DatasetConfig dc;
  dc.clips_per_song = h.clips_per_song;
  dc.clip_bars = h.clip_bars;
  dc.seed = h.split_seed;
  const Dataset data = build_dataset(scores, names, dc, vocab);
  out.clips = data.size();
  log("dataset: " + std::to_string(data.train.size()) + "/" + std::to_string(data.valid.size()) + "/" +
      std::to_string(data.test.size()) + " clips");
  if (static_cast<int>(data.test.size()) < h.eval_first + h.eval_clips) throw Error("test split too small");

  ModelConfig mc;
  mc.vocab_size = vocab.size();
  mc.seed = h.model_seed;
  auto stage = [&](Stage s, int epochs, double lr, double lambda, const std::string& name, Params& p) {
    TrainConfig tc;
    tc.stage = s;
    tc.epochs = epochs;
    tc.peak_lr = lr;
    tc.warmup_steps = h.warmup;
    tc.batch_size = h.batch;
    tc.lambda = lambda;
    tc.eta = h.eta;
    tc.seed = h.model_seed;
    tc.out_dir = (fs::path(dir) / name).string();
    return run_stage(tc, mc, vocab, data.train, data.valid, p, {}, [&](const EpochSummary& e) {
      log(name + " epoch " + std::to_string(e.epoch) + " loss " + fmt("%.4f", e.mean_loss) +
          (e.pa_accuracy >= 0 ? " match accuracy " + fmt("%.4f", e.pa_accuracy) : std::string()) + " (" +
          fmt("%.1f", e.seconds) + " s)");
    });
  };

  Params base = init_params<float>(mc, h.model_seed);
  stage(Stage::kBase, h.base_epochs, h.base_lr, 0.0, "base", base);
  Params pa = base;
  stage(Stage::kPreAdaptation, h.pa_epochs, h.pa_lr, 0.0, "pa", pa);
  out.pa_accuracy = pa_accuracy(pa, mc, vocab, data.test, h.model_seed ^ 0x7e57);
  log("held-out match accuracy on test clips " + fmt("%.4f", out.pa_accuracy));

  for (const auto& v : kVariants) {
    const bool with_pa = v.find("PA") != std::string::npos;
    const bool with_cf = v.find("CF") != std::string::npos;
    Params p = with_pa ? pa : base;
    std::string name = v;
    std::replace(name.begin(), name.end(), '+', '-');
    stage(Stage::kFineTune, h.ft_epochs, h.ft_lr, with_cf ? h.lambda : 0.0, name, p);
    const std::vector<int> ks = v == "BFT+PA+CF" ? std::vector<int>{1, 5, 15} : std::vector<int>{15};
    for (int k : ks) {
      const KRun r = evaluate_k(p, mc, vocab, data.test, h, k);
      log(v + " K=" + std::to_string(k) + " accuracy " + fmt("%.4f", r.accuracy) + " attempts/bar " +
          fmt("%.2f", r.mean_attempts) + " (" + fmt("%.1f", r.seconds) + " s)");
      if (k == 15) out.acc15[v] = r.accuracy;
      if (v == "BFT+PA+CF") {
        out.acc_k[k] = r.accuracy;
        out.attempts_k[k] = r.mean_attempts;
        out.max_attempts_k[k] = r.max_attempts;
        out.seconds_k[k] = r.seconds;
      }
      out.eval_bars = r.bars;
    }
  }
  out.seconds = seconds_since(t0);
  std::ofstream(fs::path(dir) / "outcome.json") << out.to_json().dump(2) << '\n';
  log("pipeline finished in " + fmt("%.1f", out.seconds) + " s");
  return out;
}

std::string pct(double x) { return fmt("%.2f", 100.0 * x) + "%"; }

void experiment_criteria(const std::string& work_dir, bool repeat) {
  const Hyper h;
  Outcome a;
  try {
    a = run_pipeline((fs::path(work_dir) / "run-1").string(), h);
  } catch (const std::exception& e) {
    for (int id = 6; id <= 10; ++id) report(id, false, "desk-scale pipeline", std::string("error: ") + e.what());
    return;
  }
  const double bft = a.acc15["BFT"], bpa = a.acc15["BFT+PA"], bcf = a.acc15["BFT+CF"], full = a.acc15["BFT+PA+CF"];
  const bool c6 = a.clips >= 2000 && a.eval_bars >= 500 && bpa > bft && bcf > bft && full >= bft + 0.05 &&
                  full >= bpa && full >= bcf && a.seconds < 3600.0;
  report(6, c6, "controllability ordering at K=15",
         "BFT " + pct(bft) + ", BFT+PA " + pct(bpa) + ", BFT+CF " + pct(bcf) + ", BFT+PA+CF " + pct(full) +
             " on " + std::to_string(a.eval_bars) + " bars, " + std::to_string(a.clips) +
             " clips; need PA>BFT, CF>BFT, full>=BFT+5pp and >= both; pipeline " + fmt("%.0f", a.seconds) +
             " s (limit 3600 s)");

  const double a1 = a.acc_k[1], a5 = a.acc_k[5], a15 = a.acc_k[15];
  const double slack = 0.01;
  report(7, a15 >= a5 - slack && a5 >= a1 - slack && a.eval_bars >= 500, "accuracy is monotone in K",
         "K=1 " + pct(a1) + ", K=5 " + pct(a5) + ", K=15 " + pct(a15) + " on " + std::to_string(a.eval_bars) +
             " bars (tolerance 1 pp)");

  bool within = true;
  for (int k : {1, 5, 15}) within = within && a.attempts_k[k] <= k && a.max_attempts_k[k] <= k;
  const double t1 = a.seconds_k[1], t5 = a.seconds_k[5], t15 = a.seconds_k[15];
  report(8, within && t15 > t5 && t5 > t1, "attempts bounded by K, cost grows with K",
         "attempts/bar K=1 " + fmt("%.2f", a.attempts_k[1]) + " (max " + std::to_string(a.max_attempts_k[1]) +
             "), K=5 " + fmt("%.2f", a.attempts_k[5]) + " (max " + std::to_string(a.max_attempts_k[5]) +
             "), K=15 " + fmt("%.2f", a.attempts_k[15]) + " (max " + std::to_string(a.max_attempts_k[15]) +
             "); seconds K=1 " + fmt("%.1f", t1) + ", K=5 " + fmt("%.1f", t5) + ", K=15 " + fmt("%.1f", t15));

  report(9, a.pa_accuracy > 0.9, "match classifier learns the corrupted-prompt task",
         "held-out accuracy " + pct(a.pa_accuracy) + " (need > 90%)");

  if (!repeat) {
    report(10, false, "identical seeds reproduce every fraction", "skipped (--no-repeat)");
    return;
  }
  Outcome b;
  try {
    b = run_pipeline((fs::path(work_dir) / "run-2").string(), h);
  } catch (const std::exception& e) {
    report(10, false, "identical seeds reproduce every fraction", std::string("error: ") + e.what());
    return;
  }
  const bool same = a.acc15 == b.acc15 && a.acc_k == b.acc_k && a.attempts_k == b.attempts_k &&
                    a.pa_accuracy == b.pa_accuracy;
  std::string diff;
  for (const auto& [v, x] : a.acc15) {
    if (b.acc15[v] != x) diff += " " + v + " " + fmt("%.17g", x) + " vs " + fmt("%.17g", b.acc15[v]);
  }
  report(10, same, "identical seeds reproduce every fraction",
         same ? "second run matches bit for bit (" + std::to_string(a.acc15.size() + a.acc_k.size() +
                                                                    a.attempts_k.size() + 1) +
                    " fractions compared)"
              : "mismatch:" + diff);
}

std::set<int> parse_criteria(const std::string& text) {
  std::set<int> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.insert(std::stoi(item));
    } else {
      for (int i = std::stoi(item.substr(0, dash)); i <= std::stoi(item.substr(dash + 1)); ++i) out.insert(i);
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::string work_dir = (fs::temp_directory_path() / "musebar-acceptance").string();
  std::set<int> criteria;
  for (int i = 1; i <= 10; ++i) criteria.insert(i);
  bool repeat = true;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work-dir" && i + 1 < argc) {
      work_dir = argv[++i];
    } else if (a == "--criteria" && i + 1 < argc) {
      criteria = parse_criteria(argv[++i]);
    } else if (a == "--no-repeat") {
      repeat = false;
    } else {
      std::cerr << "usage: musebar_acceptance [--work-dir DIR] [--criteria 1-5,9] [--no-repeat]\n";
      return 2;
    }
  }
  try {
    if (criteria.count(1)) criterion_tokenizer();
    if (criteria.count(2)) criterion_chords();
    if (criteria.count(3)) criterion_gradients();
    if (criteria.count(4)) criterion_losses();
    if (criteria.count(5)) criterion_adapter_identity();
    if (std::any_of(criteria.begin(), criteria.end(), [](int c) { return c >= 6; })) {
      fs::remove_all(work_dir);
      experiment_criteria(work_dir, repeat && criteria.count(10));
    }
  } catch (const std::exception& e) {
    std::cout << "FAIL acceptance suite aborted: " << e.what() << std::endl;
    return 1;
  }
  int failed = 0;
  for (const auto& v : verdicts) failed += v.pass ? 0 : 1;
  std::cout << (failed == 0 ? "ALL PASS" : std::to_string(failed) + " FAILED") << " (" << verdicts.size()
            << " criteria)" << std::endl;
  return failed == 0 ? 0 : 1;
}
