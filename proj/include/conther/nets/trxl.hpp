#pragma once

#include <cstddef>
#include <random>
#include <string>

#include "conther/nets/layers.hpp"

namespace conther::nets {

struct TrxlConfig {
  std::size_t input_dim = 0;
  std::size_t window = 7;  // K + 1 rows per window
  std::size_t d_model = 64;
  std::size_t heads = 2;
  std::size_t ff_width = 128;
};

/// Transformer block with identity-map reordering (TrXL-I): each sublayer
/// sees a layer-normalized input and its output is added back to the
/// un-normalized stream.
///
///   E = embed(x) + positions
///   Y = E + attention(LN1(E))
///   Z = Y + ff(LN2(Y))
///
/// Attention is unmasked inside the window. Positions are a learned
/// window x d_model table.
class TrxlBlock {
 public:
  TrxlBlock(const TrxlConfig& config, std::mt19937_64& rng);

  /// x is a stack of windows, [batch * window, input_dim]; returns
  /// [batch * window, d_model].
  Tensor forward(const Tensor& x) const;
  /// One window [window, input_dim] -> [window, d_model].
  Tensor forward_window(const Tensor& window) const;
  /// Same values as the last row of each window of forward(), [batch, d_model].
  /// Queries, the attention output and the feed-forward run on the last
  /// rows only; keys and values still see the whole window.
  Tensor forward_last(const Tensor& x) const;

  const TrxlConfig& config() const { return config_; }
  void collect(const std::string& prefix, ParamList& out) const;

  Linear embed;
  Tensor positions;  // [window, d_model]
  LayerNorm norm_attention;
  Linear query, key, value, attention_out;
  LayerNorm norm_ff;
  Linear ff_in, ff_out;

 private:
  Tensor attention(const Tensor& queries, const Tensor& x, std::size_t batch, std::size_t query_rows) const;
  Tensor embed_rows(const Tensor& x) const;

  TrxlConfig config_;
};

}  // namespace conther::nets
