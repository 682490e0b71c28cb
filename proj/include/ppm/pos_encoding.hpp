#pragma once

#include <span>
#include <string_view>

#include "ppm/event_log.hpp"
#include "ppm/ontology.hpp"
#include "ppm/tensor.hpp"

namespace ppm {

enum class PeMode { None, Sinusoidal, Structural };

/// "none" | "sin" | "spe"
std::string_view to_string(PeMode mode);
PeMode parse_pe_mode(std::string_view text);

struct PEConfig {
  PeMode mode = PeMode::None;
  int k = 16;  // spectral dimension, used by Structural only
};

/// PE[pos, 2i] = sin(pos / 10000^(2i/d)), PE[pos, 2i+1] = cos(same).
/// Throws ErrorKind::Parameter for odd d.
template <typename T>
Tensor<T> sinusoidal_pe(std::size_t n, std::size_t d);

/// Row t = spectral vector of token t (V x k), via embedding_for_token.
Tensor<double> token_spectral_table(const NodeEmbeddingTable& table, const Vocabulary& vocab);

/// Row i = token_spectral[ids[i]] * theta_w + theta_b.
template <typename T>
Tensor<T> structural_pe(std::span<const int> ids, const Tensor<T>& token_spectral,
                        const Tensor<T>& theta_w, const Tensor<T>& theta_b);

template <typename T>
Tensor<T> structural_pe(std::span<const int> ids, const NodeEmbeddingTable& table,
                        const Vocabulary& vocab, const Tensor<T>& theta_w,
                        const Tensor<T>& theta_b) {
  return structural_pe(ids, token_spectral_table(table, vocab).template cast<T>(), theta_w,
                       theta_b);
}

/// Accumulates dL/dtheta for the structural encoding of `ids`.
template <typename T>
void structural_pe_backward(std::span<const int> ids, const Tensor<T>& token_spectral,
                            const Tensor<T>& d_out, Parameter<T>& theta_w, Parameter<T>& theta_b);

/// What apply_pe needs beyond the embeddings. Sinusoidal mode uses nothing;
/// structural mode needs the token table and Theta.
template <typename T>
struct PeContext {
  std::span<const int> ids;
  const Tensor<T>* token_spectral = nullptr;
  const Tensor<T>* theta_w = nullptr;
  const Tensor<T>* theta_b = nullptr;
};

/// x + encoding, by mode. Throws ErrorKind::Config when structural mode lacks
/// its table or projection.
template <typename T>
Tensor<T> apply_pe(const Tensor<T>& x, const PEConfig& config, const PeContext<T>& context);

}  // namespace ppm
