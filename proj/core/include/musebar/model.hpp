// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

// Decoder-only transformer with bar-index prompt embeddings, low-rank
// adapters on the query and value projections, a language-model head and a
// per-bar match head. Forward and backward passes are written out by hand;
// the templates are instantiated for float (training) and double (gradient
// checking).

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "musebar/attributes.hpp"

namespace musebar {

struct ModelConfig {
  int layers = 4;
  int heads = 4;
  int d_model = 128;
  int d_ffn = 512;
  int vocab_size = 0;
  int max_seq_len = 1024;
  int max_bars = 32;
  int lora_rank = 8;
  double lora_alpha = 16.0;
  double dropout = 0.0;
  std::uint64_t seed = 0;

  double lora_scale() const { return lora_alpha / lora_rank; }
  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Closed-form number of scalars in a parameter set for `config`.
std::int64_t parameter_count(const ModelConfig& config);

template <typename T>
using MatrixT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ParamGroup { kTokenEmbedding, kBase, kBarEmbedding, kAdapter, kMatchHead };

template <typename T>
struct LayerParams {
  MatrixT<T> ln1_g, ln1_b;
  MatrixT<T> w_qkv, b_qkv;  // d x 3d, packed q | k | v
  MatrixT<T> w_o, b_o;
  MatrixT<T> ln2_g, ln2_b;
  MatrixT<T> w_fc, b_fc;
  MatrixT<T> w_proj, b_proj;
  MatrixT<T> lora_a_q, lora_b_q;  // d x r, r x d
  MatrixT<T> lora_a_v, lora_b_v;
};

template <typename T>
struct ParamsT {
  MatrixT<T> tok_emb;  // V x d
  MatrixT<T> pos_emb;  // max_seq_len x d
  MatrixT<T> bar_emb;  // max_bars x d
  std::vector<LayerParams<T>> layers;
  MatrixT<T> lnf_g, lnf_b;
  MatrixT<T> lm_head, lm_bias;  // d x V, 1 x V
  MatrixT<T> match_w, match_b;  // d x 1, 1 x 1

  // Visits every tensor in a fixed order.
  template <typename F>
  void visit(F&& f);
  template <typename F>
  void visit(F&& f) const;

  // Same shapes, all zeros.
  ParamsT zeros_like() const;
  std::int64_t count() const;
  bool all_finite() const;

  template <typename U>
  ParamsT<U> cast() const;
};

using Params = ParamsT<float>;

// Which tensors a training stage updates. Token-embedding rows can be limited
// to prompt tokens with `token_rows`.
struct TrainableSet {
  bool base = false;              // all transformer, position and head weights
  bool all_token_rows = false;
  std::vector<bool> token_rows;   // used when !all_token_rows
  bool bar_embedding = false;
  bool adapters = false;
  bool match_head = false;

  static TrainableSet for_base();
  // Prompt-token rows, bar embeddings, adapters and optionally the match head.
  static TrainableSet for_adaptation(const Vocab& vocab, bool match_head);
  static TrainableSet everything(int vocab_size);

  bool includes(ParamGroup group) const;
  bool token_row(int row) const {
    return all_token_rows || (row < static_cast<int>(token_rows.size()) && token_rows[static_cast<std::size_t>(row)]);
  }
};

template <typename T>
ParamsT<T> init_params(const ModelConfig& config, std::uint64_t seed);

// Rows of the logits matrix to compute: [begin, end) over sequence positions.
struct RowRange {
  int begin = 0;
  int end = -1;  // -1: through the last position
};

template <typename T>
struct LayerCache {
  MatrixT<T> x_in, ln1, mean1, rstd1;
  MatrixT<T> qkv, xa_q, xa_v;
  std::vector<MatrixT<T>> probs;  // per head, T x T
  MatrixT<T> att;                 // concatenated head outputs
  MatrixT<T> h, ln2, mean2, rstd2;
  MatrixT<T> fc_pre, fc_tanh, fc_act;
};

template <typename T>
struct ForwardCache {
  std::vector<int> ids, seq_pos, bar_pos, match_index;
  bool use_adapters = true;
  std::vector<LayerCache<T>> layers;
  MatrixT<T> x_final, lnf, meanf, rstdf;
  RowRange logit_rows;
};

template <typename T>
struct ForwardOutputT {
  MatrixT<T> logits;             // rows for logit_rows, vocab columns
  int logits_begin = 0;          // sequence position of logits row 0
  std::vector<T> match_logits;   // per bar prompt (when requested)
  std::vector<T> match_probs;
};

using ForwardOutput = ForwardOutputT<float>;

struct ForwardOptions {
  bool use_adapters = true;
  bool compute_match = false;
  RowRange logit_rows{};
  bool compute_logits = true;
};

// Causal forward pass. Throws InvalidArgument when the input exceeds
// max_seq_len or carries bar positions beyond max_bars. `cache` (optional)
// keeps the activations needed by backward().
template <typename T>
ForwardOutputT<T> forward(const ParamsT<T>& params, const ModelConfig& config, const ModelInput& input,
                          const ForwardOptions& options = {}, ForwardCache<T>* cache = nullptr);

// Reverse pass. `dlogits` matches the forward logits rows; `dmatch_logits`
// is either empty or one value per bar prompt. Gradients are accumulated
// into `grads` for the tensors in `trainable` only.
template <typename T>
void backward(const ParamsT<T>& params, const ModelConfig& config, const ForwardCache<T>& cache,
              const MatrixT<T>& dlogits, const std::vector<T>& dmatch_logits,
              const TrainableSet& trainable, ParamsT<T>& grads);

// Incremental decoding with a key/value cache. Rolling back is truncation.
class DecodeState {
 public:
  DecodeState(const ModelConfig& config);
  int length() const { return length_; }
  void truncate(int length);

 private:
  friend Eigen::VectorXf decode_step(const Params&, const ModelConfig&, DecodeState&, int, int, int);
  std::vector<MatrixT<float>> keys_, values_;
  int length_ = 0;
};

// Appends one token and returns the logits for the next position.
Eigen::VectorXf decode_step(const Params& params, const ModelConfig& config, DecodeState& state,
                            int token, int seq_pos, int bar_pos);

// Checkpoint files: "MBCK", u32 version, u64 length + config JSON, tensor
// directory, raw little-endian f32 data.
void save_checkpoint(const Params& params, const ModelConfig& config, const std::string& path);
// Throws Error on magic/version mismatch or truncation; nothing is returned
// unless the whole file validated.
std::pair<Params, ModelConfig> load_checkpoint(const std::string& path);
// Also verifies the stored config equals `expected`; the error names the
// first differing field.
Params load_checkpoint(const std::string& path, const ModelConfig& expected);

// ---------------------------------------------------------------------------

template <typename T>
template <typename F>
void ParamsT<T>::visit(F&& f) {
  f("tok_emb", tok_emb, ParamGroup::kTokenEmbedding);
  f("pos_emb", pos_emb, ParamGroup::kBase);
  f("bar_emb", bar_emb, ParamGroup::kBarEmbedding);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    const std::string p = "layer" + std::to_string(i) + ".";
    f(p + "ln1_g", l.ln1_g, ParamGroup::kBase);
    f(p + "ln1_b", l.ln1_b, ParamGroup::kBase);
    f(p + "w_qkv", l.w_qkv, ParamGroup::kBase);
    f(p + "b_qkv", l.b_qkv, ParamGroup::kBase);
    f(p + "w_o", l.w_o, ParamGroup::kBase);
    f(p + "b_o", l.b_o, ParamGroup::kBase);
    f(p + "ln2_g", l.ln2_g, ParamGroup::kBase);
    f(p + "ln2_b", l.ln2_b, ParamGroup::kBase);
    f(p + "w_fc", l.w_fc, ParamGroup::kBase);
    f(p + "b_fc", l.b_fc, ParamGroup::kBase);
    f(p + "w_proj", l.w_proj, ParamGroup::kBase);
    f(p + "b_proj", l.b_proj, ParamGroup::kBase);
    f(p + "lora_a_q", l.lora_a_q, ParamGroup::kAdapter);
    f(p + "lora_b_q", l.lora_b_q, ParamGroup::kAdapter);
    f(p + "lora_a_v", l.lora_a_v, ParamGroup::kAdapter);
    f(p + "lora_b_v", l.lora_b_v, ParamGroup::kAdapter);
  }
  f("lnf_g", lnf_g, ParamGroup::kBase);
  f("lnf_b", lnf_b, ParamGroup::kBase);
  f("lm_head", lm_head, ParamGroup::kBase);
  f("lm_bias", lm_bias, ParamGroup::kBase);
  f("match_w", match_w, ParamGroup::kMatchHead);
  f("match_b", match_b, ParamGroup::kMatchHead);
}

template <typename T>
template <typename F>
void ParamsT<T>::visit(F&& f) const {
  const_cast<ParamsT<T>*>(this)->visit(
      [&f](const std::string& name, MatrixT<T>& m, ParamGroup g) { f(name, static_cast<const MatrixT<T>&>(m), g); });
}

}  // namespace musebar
