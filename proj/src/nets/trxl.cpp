#include "conther/nets/trxl.hpp"

#include <cmath>

#include "conther/error.hpp"

namespace conther::nets {

namespace {

Tensor init_positions(std::size_t rows, std::size_t width, std::mt19937_64& rng) {
  // Small so the embedding dominates early on.
  std::normal_distribution<double> dist(0.0, 0.02);
  std::vector<double> v(rows * width);
  for (auto& x : v) x = dist(rng);
  return Tensor::from({rows, width}, std::move(v), true);
}

}  // namespace

TrxlBlock::TrxlBlock(const TrxlConfig& config, std::mt19937_64& rng) : config_(config) {
  if (config.input_dim == 0 || config.window == 0 || config.d_model == 0 || config.heads == 0 ||
      config.ff_width == 0) {
    throw ContractError("TrxlBlock: all dimensions must be positive");
  }
  if (config.d_model % config.heads != 0) {
    throw ContractError("TrxlBlock: d_model " + std::to_string(config.d_model) + " not divisible by " +
                        std::to_string(config.heads) + " heads");
  }
  const std::size_t d = config.d_model;
  embed = Linear::init(config.input_dim, d, rng);
  positions = init_positions(config.window, d, rng);
  norm_attention = LayerNorm::init(d);
  query = Linear::init(d, d, rng);
  key = Linear::init(d, d, rng);
  value = Linear::init(d, d, rng);
  attention_out = Linear::init(d, d, rng);
  norm_ff = LayerNorm::init(d);
  ff_in = Linear::init(d, config.ff_width, rng);
  ff_out = Linear::init(config.ff_width, d, rng);
}

// queries [batch * query_rows, d] attend over keys/values from x [batch * window, d].
Tensor TrxlBlock::attention(const Tensor& queries, const Tensor& x, std::size_t batch, std::size_t query_rows) const {
  const std::size_t L = config_.window, H = config_.heads, dh = config_.d_model / H;
  auto split = [&](const Tensor& t, std::size_t rows) {
    // [B*rows, d] -> [B, rows, H, dh] -> [B, H, rows, dh] -> [B*H, rows, dh]
    return nd::reshape(nd::swap_axes_12(nd::reshape(t, {batch, rows, H, dh})), {batch * H, rows, dh});
  };
  const Tensor q = split(query.forward(queries), query_rows);
  const Tensor k = split(key.forward(x), L);
  const Tensor v = split(value.forward(x), L);
  const Tensor scores = nd::scale(nd::bmm(q, k, true), 1.0 / std::sqrt(static_cast<double>(dh)));
  const Tensor mixed = nd::bmm(nd::softmax(scores, 2), v);
  const Tensor merged = nd::reshape(nd::swap_axes_12(nd::reshape(mixed, {batch, H, query_rows, dh})),
                                    {batch * query_rows, config_.d_model});
  return attention_out.forward(merged);
}

Tensor TrxlBlock::embed_rows(const Tensor& x) const {
  if (x.shape().size() != 2 || x.dim(1) != config_.input_dim || x.dim(0) == 0 || x.dim(0) % config_.window != 0) {
    throw DimensionError("TrxlBlock: expected [batch*" + std::to_string(config_.window) + ", " +
                         std::to_string(config_.input_dim) + "], got " + nd::shape_string(x.shape()));
  }
  std::vector<std::size_t> pos_rows(x.dim(0));
  for (std::size_t i = 0; i < pos_rows.size(); ++i) pos_rows[i] = i % config_.window;
  return nd::add(embed.forward(x), nd::gather_rows(positions, std::move(pos_rows)));
}

Tensor TrxlBlock::forward(const Tensor& x) const {
  const std::size_t batch = x.dim(0) / config_.window;
  const Tensor e = embed_rows(x);
  const Tensor n1 = norm_attention.forward(e);
  const Tensor y = nd::add(e, attention(n1, n1, batch, config_.window));
  const Tensor h = nd::softplus(ff_in.forward(norm_ff.forward(y)));
  return nd::add(y, ff_out.forward(h));
}

Tensor TrxlBlock::forward_last(const Tensor& x) const {
  const Tensor e = embed_rows(x);
  const std::size_t batch = x.dim(0) / config_.window;
  std::vector<std::size_t> last(batch);
  for (std::size_t b = 0; b < batch; ++b) last[b] = b * config_.window + config_.window - 1;
  const Tensor n1 = norm_attention.forward(e);
  const Tensor y = nd::add(nd::gather_rows(e, last), attention(nd::gather_rows(n1, last), n1, batch, 1));
  const Tensor h = nd::softplus(ff_in.forward(norm_ff.forward(y)));
  return nd::add(y, ff_out.forward(h));
}

Tensor TrxlBlock::forward_window(const Tensor& window) const {
  if (window.shape().size() != 2 || window.dim(0) != config_.window) {
    throw DimensionError("TrxlBlock: a single window has " + std::to_string(config_.window) + " rows, got " +
                         nd::shape_string(window.shape()));
  }
  return forward(window);
}

void TrxlBlock::collect(const std::string& prefix, ParamList& out) const {
  embed.collect(prefix + ".embed", out);
  out.push_back({prefix + ".positions", positions});
  norm_attention.collect(prefix + ".ln1", out);
  query.collect(prefix + ".query", out);
  key.collect(prefix + ".key", out);
  value.collect(prefix + ".value", out);
  attention_out.collect(prefix + ".attn_out", out);
  norm_ff.collect(prefix + ".ln2", out);
  ff_in.collect(prefix + ".ff_in", out);
  ff_out.collect(prefix + ".ff_out", out);
}

}  // namespace conther::nets
