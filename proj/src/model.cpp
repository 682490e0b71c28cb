#include "ppm/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ppm/errors.hpp"
#include "ppm/event_log.hpp"

namespace ppm {

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::Config, "model: " + msg); };
  if (d_model < 1 || hidden < 1) fail("d_model and hidden must be positive");
  if (heads < 1 || d_model % heads != 0) fail("d_model must be divisible by heads");
  if (layers < 1) fail("layers must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (vocab_size <= kFirstActivity) fail("vocabulary has no activities");
  if (pe.mode == PeMode::Sinusoidal && d_model % 2 != 0) fail("sinusoidal encoding needs even d_model");
  if (pe.mode == PeMode::Structural && pe.k < 1) fail("spe_k must be >= 1");
}

template <typename T>
std::vector<Parameter<T>*> ModelParams<T>::all() {
  std::vector<Parameter<T>*> out{&token_embedding};
  for (auto& b : blocks) {
    for (auto* p : {&b.ln1_gain, &b.ln1_bias, &b.wq, &b.bq, &b.wk, &b.bk, &b.wv, &b.bv, &b.wo,
                    &b.bo}) {
      out.push_back(p);
    }
    if (has_ffn) {
      for (auto* p : {&b.ln2_gain, &b.ln2_bias, &b.ff1_w, &b.ff1_b, &b.ff2_w, &b.ff2_b}) {
        out.push_back(p);
      }
    }
  }
  for (auto* p : {&final_ln_gain, &final_ln_bias, &head_w1, &head_b1, &head_w2, &head_b2}) {
    out.push_back(p);
  }
  if (has_theta) {
    out.push_back(&theta_w);
    out.push_back(&theta_b);
  }
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> ModelParams<T>::all() const {
  auto mut = const_cast<ModelParams<T>*>(this)->all();
  return {mut.begin(), mut.end()};
}

template <typename T>
std::size_t ModelParams<T>::count() const {
  std::size_t n = 0;
  for (const auto* p : all()) n += p->value.size();
  return n;
}

template <typename T>
void ModelParams<T>::zero_grad() {
  for (auto* p : all()) p->zero_grad();
}

template <typename T>
ModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const auto d = static_cast<std::size_t>(config.d_model);
  const auto hidden = static_cast<std::size_t>(config.hidden);
  const auto vocab = static_cast<std::size_t>(config.vocab_size);

  auto weight = [&](Parameter<T>& p, std::string name, std::size_t rows, std::size_t cols) {
    p = Parameter<T>(std::move(name), rows, cols);
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (auto& v : p.value.values()) v = static_cast<T>(rng.uniform(-a, a));
  };
  auto zeros = [](Parameter<T>& p, std::string name, std::size_t cols) {
    p = Parameter<T>(std::move(name), 1, cols);
  };
  auto ones = [](Parameter<T>& p, std::string name, std::size_t cols) {
    p = Parameter<T>(std::move(name), 1, cols);
    p.value.fill(T{1});
  };

  ModelParams<T> params;
  params.has_ffn = config.ffn_in_blocks;
  params.has_theta = config.pe.mode == PeMode::Structural;

  weight(params.token_embedding, "embedding", vocab, d);
  params.blocks.resize(static_cast<std::size_t>(config.layers));
  for (std::size_t l = 0; l < params.blocks.size(); ++l) {
    auto& b = params.blocks[l];
    const std::string pre = "block" + std::to_string(l) + ".";
    ones(b.ln1_gain, pre + "ln1.gain", d);
    zeros(b.ln1_bias, pre + "ln1.bias", d);
    weight(b.wq, pre + "wq", d, d);
    zeros(b.bq, pre + "bq", d);
    weight(b.wk, pre + "wk", d, d);
    zeros(b.bk, pre + "bk", d);
    weight(b.wv, pre + "wv", d, d);
    zeros(b.bv, pre + "bv", d);
    weight(b.wo, pre + "wo", d, d);
    zeros(b.bo, pre + "bo", d);
    if (params.has_ffn) {
      ones(b.ln2_gain, pre + "ln2.gain", d);
      zeros(b.ln2_bias, pre + "ln2.bias", d);
      weight(b.ff1_w, pre + "ff1.w", d, hidden);
      zeros(b.ff1_b, pre + "ff1.b", hidden);
      weight(b.ff2_w, pre + "ff2.w", hidden, d);
      zeros(b.ff2_b, pre + "ff2.b", d);
    }
  }
  ones(params.final_ln_gain, "final_ln.gain", d);
  zeros(params.final_ln_bias, "final_ln.bias", d);
  weight(params.head_w1, "head.w1", d, hidden);
  zeros(params.head_b1, "head.b1", hidden);
  weight(params.head_w2, "head.w2", hidden, vocab);
  zeros(params.head_b2, "head.b2", vocab);
  if (params.has_theta) {
    const auto k = static_cast<std::size_t>(config.pe.k);
    weight(params.theta_w, "spe.theta_w", k, d);
    zeros(params.theta_b, "spe.theta_b", d);
  }
  return params;
}

namespace {

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& t, std::size_t first, std::size_t width) {
  Tensor<T> out(t.rows(), width);
  for (std::size_t i = 0; i < t.rows(); ++i) {
    std::copy_n(t.data() + i * t.cols() + first, width, out.data() + i * width);
  }
  return out;
}

template <typename T>
void put_cols(Tensor<T>& dst, const Tensor<T>& src, std::size_t first) {
  for (std::size_t i = 0; i < src.rows(); ++i) {
    std::copy_n(src.data() + i * src.cols(), src.cols(), dst.data() + i * dst.cols() + first);
  }
}

constexpr double kLayerNormEps = 1e-5;

}  // namespace

template <typename T>
Model<T>::Model(ModelConfig config, ModelParams<T> params, Tensor<T> token_spectral)
    : config_(std::move(config)), params_(std::move(params)),
      token_spectral_(std::move(token_spectral)) {
  config_.validate();
  if (config_.pe.mode == PeMode::Structural) {
    if (token_spectral_.rows() != static_cast<std::size_t>(config_.vocab_size) ||
        token_spectral_.cols() != static_cast<std::size_t>(config_.pe.k)) {
      throw Error(ErrorKind::Config,
                  "structural encoding needs a " + std::to_string(config_.vocab_size) + " x " +
                      std::to_string(config_.pe.k) + " token spectral table");
    }
  }
}

template <typename T>
Tensor<T> Model<T>::forward(std::span<const int> ids, bool training, Rng* rng,
                            ForwardCache<T>* cache) const {
  if (ids.empty()) throw Error(ErrorKind::Shape, "forward: empty sequence");
  const bool drop = training && config_.dropout > 0.0;
  if (drop && !rng) throw Error(ErrorKind::Config, "forward: dropout needs a random stream");
  Rng unused(0);
  Rng& stream = rng ? *rng : unused;
  const T eps = static_cast<T>(kLayerNormEps);
  const auto d = static_cast<std::size_t>(config_.d_model);
  const auto dh = static_cast<std::size_t>(config_.head_dim());

  if (cache) {
    cache->ids.assign(ids.begin(), ids.end());
    cache->blocks.assign(params_.blocks.size(), {});
  }

  Tensor<T> x = ops::embedding_lookup(params_.token_embedding.value, ids);
  PeContext<T> pe_ctx{ids, &token_spectral_, &params_.theta_w.value, &params_.theta_b.value};
  x = apply_pe(x, config_.pe, pe_ctx);
  x = ops::dropout(x, config_.dropout, drop, stream, cache ? &cache->pe_mask : nullptr);

  for (std::size_t l = 0; l < params_.blocks.size(); ++l) {
    const auto& b = params_.blocks[l];
    BlockCache<T> local;
    BlockCache<T>& c = cache ? cache->blocks[l] : local;

    c.h = ops::layer_norm(x, b.ln1_gain.value, b.ln1_bias.value, eps, &c.ln1);
    c.q = ops::linear(c.h, b.wq.value, b.bq.value);
    c.k = ops::linear(c.h, b.wk.value, b.bk.value);
    c.v = ops::linear(c.h, b.wv.value, b.bv.value);
    c.concat = Tensor<T>(ids.size(), d);
    c.attention.resize(static_cast<std::size_t>(config_.heads));
    for (std::size_t hd = 0; hd < c.attention.size(); ++hd) {
      auto out = ops::causal_attention(slice_cols(c.q, hd * dh, dh), slice_cols(c.k, hd * dh, dh),
                                       slice_cols(c.v, hd * dh, dh), &c.attention[hd]);
      put_cols(c.concat, out, hd * dh);
    }
    Tensor<T> o = ops::linear(c.concat, b.wo.value, b.bo.value);
    x += ops::dropout(o, config_.dropout, drop, stream, &c.attn_mask);

    if (params_.has_ffn) {
      c.h2 = ops::layer_norm(x, b.ln2_gain.value, b.ln2_bias.value, eps, &c.ln2);
      c.ffn_pre = ops::linear(c.h2, b.ff1_w.value, b.ff1_b.value);
      c.ffn_act = ops::relu(c.ffn_pre);
      Tensor<T> f = ops::linear(c.ffn_act, b.ff2_w.value, b.ff2_b.value);
      x += ops::dropout(f, config_.dropout, drop, stream, &c.ffn_mask);
    }
  }

  ops::LayerNormCache<T> final_local;
  Tensor<T> xf = ops::layer_norm(x, params_.final_ln_gain.value, params_.final_ln_bias.value, eps,
                                 cache ? &cache->final_ln : &final_local);
  Tensor<T> pre = ops::linear(xf, params_.head_w1.value, params_.head_b1.value);
  Tensor<T> act = ops::relu(pre);
  Tensor<T> logits = ops::linear(act, params_.head_w2.value, params_.head_b2.value);
  if (cache) {
    cache->final_x = std::move(xf);
    cache->head_pre = std::move(pre);
    cache->head_act = std::move(act);
  }
  return logits;
}

template <typename T>
void Model<T>::backward(const ForwardCache<T>& cache, const Tensor<T>& d_logits) {
  auto& p = params_;
  const auto dh = static_cast<std::size_t>(config_.head_dim());

  Tensor<T> d = ops::linear_backward(cache.head_act, p.head_w2.value, d_logits, p.head_w2.grad,
                                     p.head_b2.grad);
  d = ops::relu_backward(d, cache.head_pre);
  d = ops::linear_backward(cache.final_x, p.head_w1.value, d, p.head_w1.grad, p.head_b1.grad);
  Tensor<T> dx = ops::layer_norm_backward(d, p.final_ln_gain.value, cache.final_ln,
                                          p.final_ln_gain.grad, p.final_ln_bias.grad);

  for (std::size_t l = p.blocks.size(); l-- > 0;) {
    auto& b = p.blocks[l];
    const auto& c = cache.blocks[l];

    if (p.has_ffn) {
      Tensor<T> df = ops::dropout_backward(dx, c.ffn_mask);
      df = ops::linear_backward(c.ffn_act, b.ff2_w.value, df, b.ff2_w.grad, b.ff2_b.grad);
      df = ops::relu_backward(df, c.ffn_pre);
      df = ops::linear_backward(c.h2, b.ff1_w.value, df, b.ff1_w.grad, b.ff1_b.grad);
      dx += ops::layer_norm_backward(df, b.ln2_gain.value, c.ln2, b.ln2_gain.grad,
                                     b.ln2_bias.grad);
    }

    Tensor<T> d_o = ops::dropout_backward(dx, c.attn_mask);
    Tensor<T> d_concat =
        ops::linear_backward(c.concat, b.wo.value, d_o, b.wo.grad, b.bo.grad);
    Tensor<T> d_q(c.q.rows(), c.q.cols()), d_k(d_q.rows(), d_q.cols()),
        d_v(d_q.rows(), d_q.cols());
    for (std::size_t hd = 0; hd < c.attention.size(); ++hd) {
      auto g = ops::causal_attention_backward(
          slice_cols(c.q, hd * dh, dh), slice_cols(c.k, hd * dh, dh),
          slice_cols(c.v, hd * dh, dh), c.attention[hd], slice_cols(d_concat, hd * dh, dh));
      put_cols(d_q, g.d_q, hd * dh);
      put_cols(d_k, g.d_k, hd * dh);
      put_cols(d_v, g.d_v, hd * dh);
    }
    Tensor<T> d_h = ops::linear_backward(c.h, b.wq.value, d_q, b.wq.grad, b.bq.grad);
    d_h += ops::linear_backward(c.h, b.wk.value, d_k, b.wk.grad, b.bk.grad);
    d_h += ops::linear_backward(c.h, b.wv.value, d_v, b.wv.grad, b.bv.grad);
    dx += ops::layer_norm_backward(d_h, b.ln1_gain.value, c.ln1, b.ln1_gain.grad,
                                   b.ln1_bias.grad);
  }

  dx = ops::dropout_backward(dx, cache.pe_mask);
  ops::embedding_backward(dx, cache.ids, p.token_embedding.grad);
  if (p.has_theta) {
    structural_pe_backward(std::span<const int>(cache.ids), token_spectral_, dx, p.theta_w,
                           p.theta_b);
  }
}

template <typename T>
std::vector<std::pair<int, double>> rank_next_tokens(std::span<const T> logits_row) {
  const T mx = *std::max_element(logits_row.begin(), logits_row.end());
  double z = 0.0;
  for (T v : logits_row) z += std::exp(static_cast<double>(v - mx));
  std::vector<std::pair<int, double>> ranked;
  ranked.reserve(logits_row.size());
  for (std::size_t t = 0; t < logits_row.size(); ++t) {
    if (t == kPad || t == kSos) continue;
    ranked.emplace_back(static_cast<int>(t),
                        std::exp(static_cast<double>(logits_row[t] - mx)) / z);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return ranked;
}

template <typename T>
std::vector<std::pair<int, double>> Model<T>::predict_topk(std::span<const int> prefix,
                                                           int k) const {
  if (k < 1) throw Error(ErrorKind::Parameter, "predict_topk: k must be >= 1");
  if (prefix.empty() || prefix.front() != kSos) {
    throw Error(ErrorKind::Parameter, "predict_topk: prefix must start with SOS");
  }
  Tensor<T> logits = forward(prefix, false, nullptr);
  auto ranked = rank_next_tokens<T>(logits.row(logits.rows() - 1));
  if (ranked.size() > static_cast<std::size_t>(k)) ranked.resize(static_cast<std::size_t>(k));
  return ranked;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ModelParams<float> init_params<float>(const ModelConfig&, std::uint64_t);
template ModelParams<double> init_params<double>(const ModelConfig&, std::uint64_t);
template class Model<float>;
template class Model<double>;
template std::vector<std::pair<int, double>> rank_next_tokens<float>(std::span<const float>);
template std::vector<std::pair<int, double>> rank_next_tokens<double>(std::span<const double>);

}  // namespace ppm
