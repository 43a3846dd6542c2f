// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

#include "musebar/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

#include "musebar/rng.hpp"

namespace musebar {

// ---------------------------------------------------------------------------
// Config

void ModelConfig::validate() const {
  if (layers < 1 || heads < 1 || d_model < 1 || d_ffn < 1) throw InvalidArgument("model dimensions must be positive");
  if (d_model % heads != 0) throw InvalidArgument("d_model must be divisible by heads");
  if (vocab_size < 1) throw InvalidArgument("vocab_size must be positive");
  if (max_seq_len < 1 || max_bars < 1) throw InvalidArgument("max_seq_len and max_bars must be positive");
  if (lora_rank < 1) throw InvalidArgument("lora_rank must be at least 1");
  if (dropout != 0.0) throw InvalidArgument("dropout is not supported; set it to 0");
}

std::string ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["layers"] = layers;
  j["heads"] = heads;
  j["d_model"] = d_model;
  j["d_ffn"] = d_ffn;
  j["vocab_size"] = vocab_size;
  j["max_seq_len"] = max_seq_len;
  j["max_bars"] = max_bars;
  j["lora_rank"] = lora_rank;
  j["lora_alpha"] = lora_alpha;
  j["dropout"] = dropout;
  j["seed"] = seed;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    ModelConfig c;
    c.layers = j.at("layers");
    c.heads = j.at("heads");
    c.d_model = j.at("d_model");
    c.d_ffn = j.at("d_ffn");
    c.vocab_size = j.at("vocab_size");
    c.max_seq_len = j.at("max_seq_len");
    c.max_bars = j.at("max_bars");
    c.lora_rank = j.at("lora_rank");
    c.lora_alpha = j.at("lora_alpha");
    c.dropout = j.at("dropout");
    c.seed = j.at("seed");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("bad model config: ") + e.what());
  }
}

std::int64_t parameter_count(const ModelConfig& c) {
  const std::int64_t d = c.d_model, f = c.d_ffn, v = c.vocab_size, r = c.lora_rank;
  const std::int64_t per_layer = 2 * d + (3 * d * d + 3 * d) + (d * d + d) + 2 * d + (d * f + f) +
                                 (f * d + d) + 4 * d * r;
  return v * d + static_cast<std::int64_t>(c.max_seq_len) * d + static_cast<std::int64_t>(c.max_bars) * d +
         c.layers * per_layer + 2 * d + (d * v + v) + (d + 1);
}

// ---------------------------------------------------------------------------
// Parameter sets

TrainableSet TrainableSet::for_base() {
  TrainableSet t;
  t.base = true;
  t.all_token_rows = true;
  return t;
}

TrainableSet TrainableSet::for_adaptation(const Vocab& vocab, bool match_head) {
  TrainableSet t;
  t.token_rows.assign(static_cast<std::size_t>(vocab.size()), false);
  for (int id = 0; id < vocab.size(); ++id) t.token_rows[static_cast<std::size_t>(id)] = vocab.is_prompt_token(id);
  t.bar_embedding = true;
  t.adapters = true;
  t.match_head = match_head;
  return t;
}

TrainableSet TrainableSet::everything(int /*vocab_size*/) {
  TrainableSet t;
  t.base = true;
  t.all_token_rows = true;
  t.bar_embedding = true;
  t.adapters = true;
  t.match_head = true;
  return t;
}

bool TrainableSet::includes(ParamGroup group) const {
  switch (group) {
    case ParamGroup::kTokenEmbedding:
      if (all_token_rows) return true;
      for (bool b : token_rows) {
        if (b) return true;
      }
      return false;
    case ParamGroup::kBase: return base;
    case ParamGroup::kBarEmbedding: return bar_embedding;
    case ParamGroup::kAdapter: return adapters;
    case ParamGroup::kMatchHead: return match_head;
  }
  return false;
}

template <typename T>
ParamsT<T> ParamsT<T>::zeros_like() const {
  ParamsT<T> z = *this;
  z.visit([](const std::string&, MatrixT<T>& m, ParamGroup) { m.setZero(); });
  return z;
}

template <typename T>
std::int64_t ParamsT<T>::count() const {
  std::int64_t n = 0;
  visit([&n](const std::string&, const MatrixT<T>& m, ParamGroup) { n += m.size(); });
  return n;
}

template <typename T>
bool ParamsT<T>::all_finite() const {
  bool ok = true;
  visit([&ok](const std::string&, const MatrixT<T>& m, ParamGroup) { ok = ok && m.allFinite(); });
  return ok;
}

template <typename T>
template <typename U>
ParamsT<U> ParamsT<T>::cast() const {
  ParamsT<U> out;
  out.tok_emb = tok_emb.template cast<U>();
  out.pos_emb = pos_emb.template cast<U>();
  out.bar_emb = bar_emb.template cast<U>();
  for (const auto& l : layers) {
    LayerParams<U> o;
    o.ln1_g = l.ln1_g.template cast<U>();
    o.ln1_b = l.ln1_b.template cast<U>();
    o.w_qkv = l.w_qkv.template cast<U>();
    o.b_qkv = l.b_qkv.template cast<U>();
    o.w_o = l.w_o.template cast<U>();
    o.b_o = l.b_o.template cast<U>();
    o.ln2_g = l.ln2_g.template cast<U>();
    o.ln2_b = l.ln2_b.template cast<U>();
    o.w_fc = l.w_fc.template cast<U>();
    o.b_fc = l.b_fc.template cast<U>();
    o.w_proj = l.w_proj.template cast<U>();
    o.b_proj = l.b_proj.template cast<U>();
    o.lora_a_q = l.lora_a_q.template cast<U>();
    o.lora_b_q = l.lora_b_q.template cast<U>();
    o.lora_a_v = l.lora_a_v.template cast<U>();
    o.lora_b_v = l.lora_b_v.template cast<U>();
    out.layers.push_back(std::move(o));
  }
  out.lnf_g = lnf_g.template cast<U>();
  out.lnf_b = lnf_b.template cast<U>();
  out.lm_head = lm_head.template cast<U>();
  out.lm_bias = lm_bias.template cast<U>();
  out.match_w = match_w.template cast<U>();
  out.match_b = match_b.template cast<U>();
  return out;
}

template <typename T>
ParamsT<T> init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  const int d = config.d_model, f = config.d_ffn, r = config.lora_rank, v = config.vocab_size;
  Rng rng(seed);
  auto normal = [&rng](int rows, int cols, double stddev) {
    MatrixT<T> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(stddev * rng.normal());
    return m;
  };
  auto uniform = [&rng](int rows, int cols, double bound) {
    MatrixT<T> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(bound * (2.0 * rng.uniform01() - 1.0));
    return m;
  };
  auto zeros = [](int rows, int cols) { return MatrixT<T>::Zero(rows, cols).eval(); };
  auto ones = [](int rows, int cols) { return MatrixT<T>::Ones(rows, cols).eval(); };

  const double stddev = 0.02;
  const double residual_stddev = 0.02 / std::sqrt(2.0 * config.layers);
  ParamsT<T> p;
  p.tok_emb = normal(v, d, stddev);
  p.pos_emb = normal(config.max_seq_len, d, stddev);
  p.bar_emb = normal(config.max_bars, d, stddev);
  for (int l = 0; l < config.layers; ++l) {
    LayerParams<T> layer;
    layer.ln1_g = ones(1, d);
    layer.ln1_b = zeros(1, d);
    layer.w_qkv = normal(d, 3 * d, stddev);
    layer.b_qkv = zeros(1, 3 * d);
    layer.w_o = normal(d, d, residual_stddev);
    layer.b_o = zeros(1, d);
    layer.ln2_g = ones(1, d);
    layer.ln2_b = zeros(1, d);
    layer.w_fc = normal(d, f, stddev);
    layer.b_fc = zeros(1, f);
    layer.w_proj = normal(f, d, residual_stddev);
    layer.b_proj = zeros(1, d);
    // Adapter B starts at zero so the adapted model equals the base model.
    layer.lora_a_q = uniform(d, r, 1.0 / std::sqrt(static_cast<double>(d)));
    layer.lora_b_q = zeros(r, d);
    layer.lora_a_v = uniform(d, r, 1.0 / std::sqrt(static_cast<double>(d)));
    layer.lora_b_v = zeros(r, d);
    p.layers.push_back(std::move(layer));
  }
  p.lnf_g = ones(1, d);
  p.lnf_b = zeros(1, d);
  p.lm_head = normal(d, v, stddev);
  p.lm_bias = zeros(1, v);
  p.match_w = normal(d, 1, stddev);
  p.match_b = zeros(1, 1);
  return p;
}

// ---------------------------------------------------------------------------
// Kernels

namespace {

constexpr double kLayerNormEps = 1e-5;

template <typename T>
void layer_norm(const MatrixT<T>& x, const MatrixT<T>& g, const MatrixT<T>& b, MatrixT<T>& y,
                MatrixT<T>& mean, MatrixT<T>& rstd) {
  const Eigen::Index n = x.rows(), d = x.cols();
  y.resize(n, d);
  mean.resize(n, 1);
  rstd.resize(n, 1);
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto row = x.row(t);
    const T m = row.mean();
    const T var = (row.array() - m).square().mean();
    const T rs = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    mean(t, 0) = m;
    rstd(t, 0) = rs;
    y.row(t) = ((row.array() - m) * rs * g.row(0).array() + b.row(0).array()).matrix();
  }
}

// dx for y = layer_norm(x); accumulates dg/db when requested.
template <typename T>
MatrixT<T> layer_norm_backward(const MatrixT<T>& dy, const MatrixT<T>& x, const MatrixT<T>& mean,
                               const MatrixT<T>& rstd, const MatrixT<T>& g, MatrixT<T>* dg,
                               MatrixT<T>* db) {
  const Eigen::Index n = x.rows(), d = x.cols();
  MatrixT<T> dx(n, d);
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto xhat = ((x.row(t).array() - mean(t, 0)) * rstd(t, 0)).eval();
    const auto dxhat = (dy.row(t).array() * g.row(0).array()).eval();
    const T mean_dxhat = dxhat.mean();
    const T mean_dxhat_xhat = (dxhat * xhat).mean();
    dx.row(t) = ((dxhat - mean_dxhat - xhat * mean_dxhat_xhat) * rstd(t, 0)).matrix();
    if (dg != nullptr) dg->row(0).array() += dy.row(t).array() * xhat;
    if (db != nullptr) db->row(0) += dy.row(t);
  }
  return dx;
}

template <typename T>
constexpr T kGeluC = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
template <typename T>
constexpr T kGeluCubic = static_cast<T>(0.044715);

// tanh(sqrt(2/pi) (x + 0.044715 x^3)), the inner term of the tanh GELU.
template <typename Derived>
auto gelu_tanh(const Eigen::ArrayBase<Derived>& x) {
  using T = typename Derived::Scalar;
  return (kGeluC<T> * (x + kGeluCubic<T> * x.cube())).tanh();
}

// In-place causal softmax of a square score matrix.
template <typename T>
void causal_softmax(MatrixT<T>& s) {
  const Eigen::Index n = s.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    auto seg = s.row(i).head(i + 1).array();
    const T m = seg.maxCoeff();
    seg = (seg - m).exp();
    seg /= seg.sum();
    if (i + 1 < n) s.row(i).tail(n - i - 1).setZero();
  }
}

void check_input(const ModelConfig& config, const ModelInput& input) {
  if (input.length() == 0) throw InvalidArgument("empty model input");
  if (input.length() > config.max_seq_len) {
    throw InvalidArgument("input length " + std::to_string(input.length()) + " exceeds max_seq_len " +
                          std::to_string(config.max_seq_len));
  }
  for (int t = 0; t < input.length(); ++t) {
    const auto i = static_cast<std::size_t>(t);
    if (input.ids[i] < 0 || input.ids[i] >= config.vocab_size) throw InvalidArgument("token id out of range");
    if (input.seq_pos[i] >= config.max_seq_len) throw InvalidArgument("sequential position out of range");
    if (input.bar_pos[i] >= config.max_bars) throw InvalidArgument("bar position out of range");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Forward

template <typename T>
ForwardOutputT<T> forward(const ParamsT<T>& params, const ModelConfig& config, const ModelInput& input,
                          const ForwardOptions& options, ForwardCache<T>* cache) {
  check_input(config, input);
  const int n = input.length();
  const int d = config.d_model;
  const int heads = config.heads;
  const int hd = d / heads;
  const T scale = static_cast<T>(config.lora_scale());
  const T att_scale = T(1) / std::sqrt(static_cast<T>(hd));

  ForwardCache<T> local;
  ForwardCache<T>& c = cache != nullptr ? *cache : local;
  c.ids = input.ids;
  c.seq_pos = input.seq_pos;
  c.bar_pos = input.bar_pos;
  c.match_index = options.compute_match ? input.bar_prompt_index : std::vector<int>{};
  c.use_adapters = options.use_adapters;
  c.layers.resize(static_cast<std::size_t>(config.layers));

  MatrixT<T> x(n, d);
  for (int t = 0; t < n; ++t) {
    const auto i = static_cast<std::size_t>(t);
    x.row(t) = params.tok_emb.row(input.ids[i]);
    if (input.seq_pos[i] >= 0) x.row(t) += params.pos_emb.row(input.seq_pos[i]);
    if (input.bar_pos[i] >= 0) x.row(t) += params.bar_emb.row(input.bar_pos[i]);
  }

  for (int l = 0; l < config.layers; ++l) {
    const auto& p = params.layers[static_cast<std::size_t>(l)];
    // Without a caller cache only one layer's activations are live at a time.
    LayerCache<T>& lc = cache != nullptr ? c.layers[static_cast<std::size_t>(l)] : c.layers[0];
    lc.x_in = x;
    layer_norm(lc.x_in, p.ln1_g, p.ln1_b, lc.ln1, lc.mean1, lc.rstd1);
    lc.qkv.noalias() = lc.ln1 * p.w_qkv;
    lc.qkv.rowwise() += p.b_qkv.row(0);
    if (options.use_adapters) {
      lc.xa_q.noalias() = lc.ln1 * p.lora_a_q;
      lc.xa_v.noalias() = lc.ln1 * p.lora_a_v;
      lc.qkv.leftCols(d).noalias() += scale * (lc.xa_q * p.lora_b_q);
      lc.qkv.rightCols(d).noalias() += scale * (lc.xa_v * p.lora_b_v);
    }
    lc.probs.resize(static_cast<std::size_t>(heads));
    lc.att.resize(n, d);
    for (int h = 0; h < heads; ++h) {
      auto& probs = lc.probs[static_cast<std::size_t>(h)];
      const auto q = lc.qkv.middleCols(h * hd, hd);
      const auto k = lc.qkv.middleCols(d + h * hd, hd);
      const auto v = lc.qkv.middleCols(2 * d + h * hd, hd);
      probs.noalias() = att_scale * (q * k.transpose());
      causal_softmax(probs);
      lc.att.middleCols(h * hd, hd).noalias() = probs * v;
    }
    lc.h = lc.x_in;
    lc.h.noalias() += lc.att * p.w_o;
    lc.h.rowwise() += p.b_o.row(0);
    layer_norm(lc.h, p.ln2_g, p.ln2_b, lc.ln2, lc.mean2, lc.rstd2);
    lc.fc_pre.noalias() = lc.ln2 * p.w_fc;
    lc.fc_pre.rowwise() += p.b_fc.row(0);
    lc.fc_tanh = gelu_tanh(lc.fc_pre.array()).matrix();
    lc.fc_act = (T(0.5) * lc.fc_pre.array() * (T(1) + lc.fc_tanh.array())).matrix();
    x = lc.h;
    x.noalias() += lc.fc_act * p.w_proj;
    x.rowwise() += p.b_proj.row(0);
  }
  if (cache == nullptr) c.layers.clear();

  c.x_final = std::move(x);
  layer_norm(c.x_final, params.lnf_g, params.lnf_b, c.lnf, c.meanf, c.rstdf);

  ForwardOutputT<T> out;
  RowRange rows = options.logit_rows;
  if (rows.end < 0) rows.end = n;
  rows.begin = std::clamp(rows.begin, 0, n);
  rows.end = std::clamp(rows.end, rows.begin, n);
  if (!options.compute_logits) rows.end = rows.begin;
  c.logit_rows = rows;
  out.logits_begin = rows.begin;
  out.logits.noalias() = c.lnf.middleRows(rows.begin, rows.end - rows.begin) * params.lm_head;
  out.logits.rowwise() += params.lm_bias.row(0);

  if (options.compute_match) {
    for (int idx : input.bar_prompt_index) {
      const T z = c.lnf.row(idx).dot(params.match_w.col(0)) + params.match_b(0, 0);
      out.match_logits.push_back(z);
      out.match_probs.push_back(T(1) / (T(1) + std::exp(-z)));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Backward

template <typename T>
void backward(const ParamsT<T>& params, const ModelConfig& config, const ForwardCache<T>& c,
              const MatrixT<T>& dlogits, const std::vector<T>& dmatch_logits, const TrainableSet& trainable,
              ParamsT<T>& grads) {
  const int n = static_cast<int>(c.ids.size());
  const int d = config.d_model;
  const int heads = config.heads;
  const int hd = d / heads;
  const T scale = static_cast<T>(config.lora_scale());
  const T att_scale = T(1) / std::sqrt(static_cast<T>(hd));
  const bool base = trainable.base;
  const bool adapters = trainable.adapters && c.use_adapters;
  if (static_cast<int>(c.layers.size()) != config.layers) {
    throw InvalidArgument("backward needs a forward cache with all layers");
  }
  const int rows = c.logit_rows.end - c.logit_rows.begin;
  if (dlogits.rows() != rows || (rows > 0 && dlogits.cols() != config.vocab_size)) {
    throw InvalidArgument("dlogits shape does not match the forward logits");
  }

  MatrixT<T> dlnf = MatrixT<T>::Zero(n, d);
  if (rows > 0) {
    dlnf.middleRows(c.logit_rows.begin, rows).noalias() = dlogits * params.lm_head.transpose();
    if (base) {
      grads.lm_head.noalias() += c.lnf.middleRows(c.logit_rows.begin, rows).transpose() * dlogits;
      grads.lm_bias.row(0) += dlogits.colwise().sum();
    }
  }
  if (!dmatch_logits.empty()) {
    if (dmatch_logits.size() != c.match_index.size()) throw InvalidArgument("dmatch size mismatch");
    for (std::size_t i = 0; i < dmatch_logits.size(); ++i) {
      const int idx = c.match_index[i];
      const T g = dmatch_logits[i];
      dlnf.row(idx) += g * params.match_w.col(0).transpose();
      if (trainable.match_head) {
        grads.match_w.col(0) += g * c.lnf.row(idx).transpose();
        grads.match_b(0, 0) += g;
      }
    }
  }
  MatrixT<T> dx = layer_norm_backward(dlnf, c.x_final, c.meanf, c.rstdf, params.lnf_g,
                                      base ? &grads.lnf_g : nullptr, base ? &grads.lnf_b : nullptr);

  MatrixT<T> d_fc, dh, d_att, dqkv(n, 3 * d), d_ln1, dp, dv_h, dpv;
  for (int l = config.layers - 1; l >= 0; --l) {
    const auto& p = params.layers[static_cast<std::size_t>(l)];
    auto& g = grads.layers[static_cast<std::size_t>(l)];
    const auto& lc = c.layers[static_cast<std::size_t>(l)];

    // x_out = h + gelu(ln2 W_fc + b_fc) W_proj + b_proj
    d_fc.noalias() = dx * p.w_proj.transpose();
    if (base) {
      g.w_proj.noalias() += lc.fc_act.transpose() * dx;
      g.b_proj.row(0) += dx.colwise().sum();
    }
    {
      const auto x = lc.fc_pre.array();
      const auto th = lc.fc_tanh.array();
      d_fc.array() *= T(0.5) * (T(1) + th) +
                      T(0.5) * x * (T(1) - th.square()) * kGeluC<T> * (T(1) + T(3) * kGeluCubic<T> * x.square());
    }
    MatrixT<T> d_ln2 = d_fc * p.w_fc.transpose();
    if (base) {
      g.w_fc.noalias() += lc.ln2.transpose() * d_fc;
      g.b_fc.row(0) += d_fc.colwise().sum();
    }
    dh = dx + layer_norm_backward(d_ln2, lc.h, lc.mean2, lc.rstd2, p.ln2_g, base ? &g.ln2_g : nullptr,
                                  base ? &g.ln2_b : nullptr);

    // h = x_in + att W_o + b_o
    d_att.noalias() = dh * p.w_o.transpose();
    if (base) {
      g.w_o.noalias() += lc.att.transpose() * dh;
      g.b_o.row(0) += dh.colwise().sum();
    }
    for (int h = 0; h < heads; ++h) {
      const auto& probs = lc.probs[static_cast<std::size_t>(h)];
      const auto q = lc.qkv.middleCols(h * hd, hd);
      const auto k = lc.qkv.middleCols(d + h * hd, hd);
      const auto v = lc.qkv.middleCols(2 * d + h * hd, hd);
      const auto d_out = d_att.middleCols(h * hd, hd);
      dp.noalias() = d_out * v.transpose();
      dqkv.middleCols(2 * d + h * hd, hd).noalias() = probs.transpose() * d_out;
      // softmax backward, restricted to the causal triangle
      for (int i = 0; i < n; ++i) {
        const T dot = probs.row(i).head(i + 1).dot(dp.row(i).head(i + 1));
        dp.row(i).head(i + 1).array() = probs.row(i).head(i + 1).array() * (dp.row(i).head(i + 1).array() - dot);
        if (i + 1 < n) dp.row(i).tail(n - i - 1).setZero();
      }
      dp *= att_scale;
      dqkv.middleCols(h * hd, hd).noalias() = dp * k;
      dqkv.middleCols(d + h * hd, hd).noalias() = dp.transpose() * q;
    }
    if (base) {
      g.w_qkv.noalias() += lc.ln1.transpose() * dqkv;
      g.b_qkv.row(0) += dqkv.colwise().sum();
    }
    d_ln1.noalias() = dqkv * p.w_qkv.transpose();
    if (c.use_adapters) {
      const auto dq = dqkv.leftCols(d);
      const auto dv = dqkv.rightCols(d);
      MatrixT<T> d_xa_q = scale * (dq * p.lora_b_q.transpose());
      MatrixT<T> d_xa_v = scale * (dv * p.lora_b_v.transpose());
      if (adapters) {
        g.lora_b_q.noalias() += scale * (lc.xa_q.transpose() * dq);
        g.lora_b_v.noalias() += scale * (lc.xa_v.transpose() * dv);
        g.lora_a_q.noalias() += lc.ln1.transpose() * d_xa_q;
        g.lora_a_v.noalias() += lc.ln1.transpose() * d_xa_v;
      }
      d_ln1.noalias() += d_xa_q * p.lora_a_q.transpose();
      d_ln1.noalias() += d_xa_v * p.lora_a_v.transpose();
    }
    dx = dh + layer_norm_backward(d_ln1, lc.x_in, lc.mean1, lc.rstd1, p.ln1_g, base ? &g.ln1_g : nullptr,
                                  base ? &g.ln1_b : nullptr);
  }

  for (int t = 0; t < n; ++t) {
    const auto i = static_cast<std::size_t>(t);
    if (trainable.token_row(c.ids[i])) grads.tok_emb.row(c.ids[i]) += dx.row(t);
    if (base && c.seq_pos[i] >= 0) grads.pos_emb.row(c.seq_pos[i]) += dx.row(t);
    if (trainable.bar_embedding && c.bar_pos[i] >= 0) grads.bar_emb.row(c.bar_pos[i]) += dx.row(t);
  }
}

// ---------------------------------------------------------------------------
// Incremental decoding

DecodeState::DecodeState(const ModelConfig& config) {
  keys_.assign(static_cast<std::size_t>(config.layers), MatrixT<float>::Zero(config.max_seq_len, config.d_model));
  values_ = keys_;
}

void DecodeState::truncate(int length) {
  if (length < 0 || length > length_) throw InvalidArgument("cannot truncate decode state forward");
  length_ = length;
}

Eigen::VectorXf decode_step(const Params& params, const ModelConfig& config, DecodeState& state, int token,
                            int seq_pos, int bar_pos) {
  if (state.length_ >= config.max_seq_len) throw InvalidArgument("decode state is full (max_seq_len)");
  if (token < 0 || token >= config.vocab_size) throw InvalidArgument("token id out of range");
  if (seq_pos >= config.max_seq_len || bar_pos >= config.max_bars) throw InvalidArgument("position out of range");
  const int d = config.d_model;
  const int heads = config.heads;
  const int hd = d / heads;
  const int t = state.length_;
  const float scale = static_cast<float>(config.lora_scale());
  const float att_scale = 1.0f / std::sqrt(static_cast<float>(hd));

  using Row = Eigen::Matrix<float, 1, Eigen::Dynamic>;
  Row x = params.tok_emb.row(token);
  if (seq_pos >= 0) x += params.pos_emb.row(seq_pos);
  if (bar_pos >= 0) x += params.bar_emb.row(bar_pos);

  auto norm = [](const Row& in, const MatrixT<float>& g, const MatrixT<float>& b) {
    const float m = in.mean();
    const float var = (in.array() - m).square().mean();
    const float rs = 1.0f / std::sqrt(var + static_cast<float>(kLayerNormEps));
    return Row(((in.array() - m) * rs * g.row(0).array() + b.row(0).array()).matrix());
  };

  Row att(d), scores;
  for (int l = 0; l < config.layers; ++l) {
    const auto& p = params.layers[static_cast<std::size_t>(l)];
    auto& keys = state.keys_[static_cast<std::size_t>(l)];
    auto& values = state.values_[static_cast<std::size_t>(l)];
    const Row ln1 = norm(x, p.ln1_g, p.ln1_b);
    Row qkv = ln1 * p.w_qkv + p.b_qkv;
    qkv.leftCols(d) += scale * ((ln1 * p.lora_a_q) * p.lora_b_q);
    qkv.rightCols(d) += scale * ((ln1 * p.lora_a_v) * p.lora_b_v);
    keys.row(t) = qkv.middleCols(d, d);
    values.row(t) = qkv.rightCols(d);
    for (int h = 0; h < heads; ++h) {
      const auto q = qkv.middleCols(h * hd, hd);
      scores.noalias() = att_scale * (q * keys.block(0, h * hd, t + 1, hd).transpose());
      const float m = scores.maxCoeff();
      scores = (scores.array() - m).exp().matrix();
      scores /= scores.sum();
      att.middleCols(h * hd, hd).noalias() = scores * values.block(0, h * hd, t + 1, hd);
    }
    const Row hrow = x + att * p.w_o + p.b_o;
    const Row ln2 = norm(hrow, p.ln2_g, p.ln2_b);
    Row fc = ln2 * p.w_fc + p.b_fc;
    fc = (0.5f * fc.array() * (1.0f + gelu_tanh(fc.array()))).matrix();
    x = hrow + fc * p.w_proj + p.b_proj;
  }
  const Row lnf = norm(x, params.lnf_g, params.lnf_b);
  ++state.length_;
  return (lnf * params.lm_head + params.lm_bias).transpose();
}

// ---------------------------------------------------------------------------

template struct ParamsT<float>;
template struct ParamsT<double>;
template ParamsT<double> ParamsT<float>::cast<double>() const;
template ParamsT<float> ParamsT<double>::cast<float>() const;
template ParamsT<float> init_params<float>(const ModelConfig&, std::uint64_t);
template ParamsT<double> init_params<double>(const ModelConfig&, std::uint64_t);
template ForwardOutputT<float> forward<float>(const ParamsT<float>&, const ModelConfig&, const ModelInput&,
                                              const ForwardOptions&, ForwardCache<float>*);
template ForwardOutputT<double> forward<double>(const ParamsT<double>&, const ModelConfig&, const ModelInput&,
                                                const ForwardOptions&, ForwardCache<double>*);
template void backward<float>(const ParamsT<float>&, const ModelConfig&, const ForwardCache<float>&,
                              const MatrixT<float>&, const std::vector<float>&, const TrainableSet&,
                              ParamsT<float>&);
template void backward<double>(const ParamsT<double>&, const ModelConfig&, const ForwardCache<double>&,
                               const MatrixT<double>&, const std::vector<double>&, const TrainableSet&,
                               ParamsT<double>&);

}  // namespace musebar
