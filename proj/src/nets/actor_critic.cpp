#include "conther/nets/actor_critic.hpp"

#include <array>
#include <cmath>

#include "conther/error.hpp"

namespace conther::nets {

namespace {

void require_finite(const Tensor& t, const char* what) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw ContractError(std::string(what) + " contains a non-finite value");
  }
}

void check_windows(const NetConfig& c, const Tensor& windows) {
  if (windows.shape().size() != 2 || windows.dim(1) != c.input_dim || windows.dim(0) == 0 ||
      windows.dim(0) % c.window != 0) {
    throw DimensionError("expected windows of shape [batch*" + std::to_string(c.window) + ", " +
                         std::to_string(c.input_dim) + "], got " + nd::shape_string(windows.shape()));
  }
  require_finite(windows, "network input");
}

// Last-position block output, with the raw last row appended for V1.
Tensor fc_features(const NetConfig& c, const TrxlBlock& block, const Tensor& windows) {
  Tensor h = block.forward_last(windows);
  if (c.wiring == Wiring::V0) return h;
  const std::array<Tensor, 2> parts{h, nd::gather_rows(windows, last_rows(windows.dim(0) / c.window, c.window))};
  return nd::concat_cols(parts);
}

}  // namespace

std::string to_string(Wiring w) { return w == Wiring::V0 ? "v0" : "v1"; }

void NetConfig::validate() const {
  if (input_dim == 0 || action_dim == 0 || window == 0 || hidden == 0) {
    throw ContractError("network dimensions must be positive");
  }
  if (heads == 0 || d_model % heads != 0) {
    throw ContractError("d_model " + std::to_string(d_model) + " not divisible by " + std::to_string(heads) +
                        " heads");
  }
}

FcStack FcStack::init(std::size_t in, std::size_t hidden, std::size_t out, double output_scale,
                      std::mt19937_64& rng) {
  FcStack s;
  s.l1 = Linear::init(in, hidden, rng);
  s.l2 = Linear::init(hidden, hidden, rng);
  s.l3 = Linear::init(hidden, out, rng, output_scale);
  return s;
}

Tensor FcStack::forward(const Tensor& x) const {
  return l3.forward(nd::softplus(l2.forward(nd::softplus(l1.forward(x)))));
}

void FcStack::collect(const std::string& prefix, ParamList& out) const {
  l1.collect(prefix + ".fc1", out);
  l2.collect(prefix + ".fc2", out);
  l3.collect(prefix + ".fc3", out);
}

std::vector<std::size_t> last_rows(std::size_t batch, std::size_t window) {
  std::vector<std::size_t> rows(batch);
  for (std::size_t b = 0; b < batch; ++b) rows[b] = b * window + window - 1;
  return rows;
}

// The block is built before the FC stack in both nets so a fixed seed
// gives the same transformer weights for V0 and V1.

ActorNet::ActorNet(const NetConfig& config, std::uint64_t seed)
    : ActorNet(config, [&] {
        config.validate();
        return std::mt19937_64(seed);
      }()) {}

ActorNet::ActorNet(const NetConfig& config, std::mt19937_64 rng)
    : block(config.trxl(), rng),
      fc(FcStack::init(config.fc_input_dim(), config.hidden, config.action_dim, config.output_scale, rng)),
      config_(config) {}

Tensor ActorNet::forward(const Tensor& windows) const {
  check_windows(config_, windows);
  return nd::tanh(fc.forward(fc_features(config_, block, windows)));
}

ParamList ActorNet::parameters() const {
  ParamList out;
  block.collect("actor.trxl", out);
  fc.collect("actor", out);
  return out;
}

ActorNet ActorNet::clone() const {
  ActorNet copy(config_, 0);
  copy_parameters(copy.parameters(), parameters());
  return copy;
}

CriticNet::CriticNet(const NetConfig& config, std::uint64_t seed)
    : CriticNet(config, [&] {
        config.validate();
        return std::mt19937_64(seed);
      }()) {}

CriticNet::CriticNet(const NetConfig& config, std::mt19937_64 rng)
    : block1(config.trxl(), rng),
      block2(config.trxl(), rng),
      fc1(FcStack::init(config.fc_input_dim() + config.action_dim, config.hidden, 1, config.output_scale, rng)),
      fc2(FcStack::init(config.fc_input_dim() + config.action_dim, config.hidden, 1, config.output_scale, rng)),
      config_(config) {}

QPair CriticNet::forward(const Tensor& windows, const Tensor& actions) const {
  check_windows(config_, windows);
  const std::size_t batch = windows.dim(0) / config_.window;
  if (actions.shape() != nd::Shape{batch, config_.action_dim}) {
    throw DimensionError("critic: expected actions [" + std::to_string(batch) + ", " +
                         std::to_string(config_.action_dim) + "], got " + nd::shape_string(actions.shape()));
  }
  require_finite(actions, "critic action");
  auto head = [&](const TrxlBlock& block, const FcStack& fc, const char* name) {
    const std::array<Tensor, 2> parts{fc_features(config_, block, windows), actions};
    Tensor q = fc.forward(nd::concat_cols(parts));
    const auto v = q.data();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i])) {
        throw NumericError(std::string("critic head ") + name + " produced " + std::to_string(v[i]) +
                           " for batch row " + std::to_string(i));
      }
    }
    return q;
  };
  return {head(block1, fc1, "q1"), head(block2, fc2, "q2")};
}

ParamList CriticNet::parameters() const {
  ParamList out;
  block1.collect("critic.q1.trxl", out);
  fc1.collect("critic.q1", out);
  block2.collect("critic.q2.trxl", out);
  fc2.collect("critic.q2", out);
  return out;
}

CriticNet CriticNet::clone() const {
  CriticNet copy(config_, 0);
  copy_parameters(copy.parameters(), parameters());
  return copy;
}

}  // namespace conther::nets
