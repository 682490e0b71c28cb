#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ppm/ops.hpp"
#include "ppm/pos_encoding.hpp"
#include "ppm/rng.hpp"
#include "ppm/tensor.hpp"

namespace ppm {

struct ModelConfig {
  int d_model = 64;
  int hidden = 128;  // width of the decoding head (and of block FFNs when enabled)
  int heads = 4;
  int layers = 4;
  double dropout = 0.1;
  int vocab_size = 0;
  PEConfig pe;
  bool ffn_in_blocks = false;

  /// Throws ErrorKind::Config.
  void validate() const;
  int head_dim() const { return d_model / heads; }

  bool operator==(const ModelConfig& o) const {
    return d_model == o.d_model && hidden == o.hidden && heads == o.heads &&
           layers == o.layers && dropout == o.dropout && vocab_size == o.vocab_size &&
           pe.mode == o.pe.mode && pe.k == o.pe.k && ffn_in_blocks == o.ffn_in_blocks;
  }
};

template <typename T>
struct BlockParams {
  Parameter<T> ln1_gain, ln1_bias;
  Parameter<T> wq, bq, wk, bk, wv, bv, wo, bo;
  // Present only with ffn_in_blocks.
  Parameter<T> ln2_gain, ln2_bias, ff1_w, ff1_b, ff2_w, ff2_b;
};

template <typename T>
struct ModelParams {
  Parameter<T> token_embedding;
  std::vector<BlockParams<T>> blocks;
  Parameter<T> final_ln_gain, final_ln_bias;
  Parameter<T> head_w1, head_b1, head_w2, head_b2;
  // Structural encoding projection (spe mode only).
  Parameter<T> theta_w, theta_b;

  bool has_ffn = false;
  bool has_theta = false;

  /// Every live parameter in a fixed order (the checkpoint order).
  std::vector<Parameter<T>*> all();
  std::vector<const Parameter<T>*> all() const;
  std::size_t count() const;
  void zero_grad();
};

/// Weights ~ U(-a, a) with a = sqrt(6 / (fan_in + fan_out)); biases 0;
/// layer-norm gains 1. Values are drawn in double and rounded to T, so float
/// and double models built from one seed agree up to rounding.
template <typename T>
ModelParams<T> init_params(const ModelConfig& config, std::uint64_t seed);

template <typename T>
struct BlockCache {
  ops::LayerNormCache<T> ln1;
  Tensor<T> h, q, k, v, concat;
  std::vector<ops::AttentionCache<T>> attention;
  Tensor<T> attn_mask;
  ops::LayerNormCache<T> ln2;
  Tensor<T> h2, ffn_pre, ffn_act, ffn_mask;
};

template <typename T>
struct ForwardCache {
  std::vector<int> ids;
  Tensor<T> pe_mask;
  std::vector<BlockCache<T>> blocks;
  ops::LayerNormCache<T> final_ln;
  Tensor<T> final_x, head_pre, head_act;
};

/// Decoder-only transformer: token embedding, positional encoding, Pre-LN
/// causal multi-head attention blocks with residuals, final layer norm and a
/// two-layer ReLU decoding head. Logits row i scores the token at i+1.
template <typename T>
class Model {
 public:
  /// `token_spectral` (V x k) is required for structural encoding and is
  /// frozen; Theta learns the projection.
  Model(ModelConfig config, ModelParams<T> params, Tensor<T> token_spectral = {});

  static Model initialize(const ModelConfig& config, std::uint64_t seed,
                          const Tensor<double>& token_spectral = {}) {
    return Model(config, init_params<T>(config, seed), token_spectral.template cast<T>());
  }

  const ModelConfig& config() const { return config_; }
  ModelParams<T>& params() { return params_; }
  const ModelParams<T>& params() const { return params_; }
  const Tensor<T>& token_spectral() const { return token_spectral_; }

  /// `rng` may be null when `training` is false or dropout is 0. Throws
  /// ErrorKind::Shape for an empty sequence and ErrorKind::Index for ids
  /// outside the vocabulary.
  Tensor<T> forward(std::span<const int> ids, bool training, Rng* rng,
                    ForwardCache<T>* cache = nullptr) const;

  /// Accumulates parameter gradients for dL/dlogits.
  void backward(const ForwardCache<T>& cache, const Tensor<T>& d_logits);

  /// Next-token candidates after `prefix`, most probable first (ties: lower
  /// id). PAD and SOS are never ranked; EOS is. Throws ErrorKind::Parameter
  /// for k < 1.
  std::vector<std::pair<int, double>> predict_topk(std::span<const int> prefix, int k) const;

 private:
  ModelConfig config_;
  ModelParams<T> params_;
  Tensor<T> token_spectral_;
};

/// Softmax of one logits row restricted to rankable tokens, sorted by
/// probability descending then id ascending.
template <typename T>
std::vector<std::pair<int, double>> rank_next_tokens(std::span<const T> logits_row);

}  // namespace ppm
