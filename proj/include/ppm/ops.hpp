#pragma once

#include <span>
#include <vector>

#include "ppm/rng.hpp"
#include "ppm/tensor.hpp"

// Differentiable primitives. Each forward has a matching backward that
// accumulates parameter gradients (+=) and returns input gradients.
// Instantiated for float (training) and double (gradient checks).

namespace ppm::ops {

/// Additive score for masked (future) attention positions.
inline constexpr double kMaskValue = -1e9;

template <typename T>
Tensor<T> embedding_lookup(const Tensor<T>& table, std::span<const int> ids);
template <typename T>
void embedding_backward(const Tensor<T>& d_out, std::span<const int> ids, Tensor<T>& d_table);

/// y = x w + b, with b broadcast over rows.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);
/// Accumulates into d_w / d_b and returns dL/dx. When `want_dx` is false an
/// empty tensor is returned.
template <typename T>
Tensor<T> linear_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& d_out,
                          Tensor<T>& d_w, Tensor<T>& d_b, bool want_dx = true);

template <typename T>
struct LayerNormCache {
  Tensor<T> normalized;   // (x - mean) * rstd
  std::vector<T> rstd;    // 1 / sqrt(var + eps) per row
};

/// Per-row (x - mean) / sqrt(var + eps) * gain + bias, population variance.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps,
                     LayerNormCache<T>* cache = nullptr);
template <typename T>
Tensor<T> layer_norm_backward(const Tensor<T>& d_out, const Tensor<T>& gain,
                              const LayerNormCache<T>& cache, Tensor<T>& d_gain,
                              Tensor<T>& d_bias);

/// Row-wise softmax with max subtraction.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x);

template <typename T>
struct AttentionCache {
  Tensor<T> weights;  // n x n, zero above the diagonal
};

/// softmax(q k^T / sqrt(d_h) + mask) v, where the mask adds kMaskValue to
/// every score whose key comes after its query.
template <typename T>
Tensor<T> causal_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                           AttentionCache<T>* cache = nullptr);

template <typename T>
struct AttentionGrads {
  Tensor<T> d_q, d_k, d_v;
};

template <typename T>
AttentionGrads<T> causal_attention_backward(const Tensor<T>& q, const Tensor<T>& k,
                                            const Tensor<T>& v, const AttentionCache<T>& cache,
                                            const Tensor<T>& d_out);

/// Inverted dropout. In training mode each element is zeroed with
/// probability `rate` and survivors are scaled by 1/(1-rate); `mask` (if
/// given) receives the per-element multiplier. Outside training, or with
/// rate 0, the input is returned unchanged and the mask is left empty.
/// Throws ErrorKind::Parameter unless 0 <= rate < 1.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, bool training, Rng& rng,
                  Tensor<T>* mask = nullptr);
template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& d_out, const Tensor<T>& mask);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& d_out, const Tensor<T>& x);

template <typename T>
struct MaskedLoss {
  double sum = 0.0;         // summed -log p over counted positions
  std::size_t counted = 0;  // positions whose target is not ignored
  Tensor<T> d_logits;       // gradient of the *mean* loss

  double mean() const { return counted ? sum / static_cast<double>(counted) : 0.0; }
};

/// Mean token cross-entropy over positions whose target is not in `ignore`.
/// Ignored positions get zero loss and zero gradient; if every position is
/// ignored the loss is 0. `grad_scale` overrides the 1/counted factor used
/// for d_logits (batched callers pass 1/total_counted).
template <typename T>
MaskedLoss<T> cross_entropy_masked(const Tensor<T>& logits, std::span<const int> targets,
                                   std::span<const int> ignore, double grad_scale = 0.0);

}  // namespace ppm::ops
