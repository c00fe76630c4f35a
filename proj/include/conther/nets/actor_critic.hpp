#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <random>
#include <vector>

#include "conther/nets/layers.hpp"
#include "conther/nets/trxl.hpp"

namespace conther::nets {

enum class Wiring { V0, V1 };

std::string to_string(Wiring w);

struct NetConfig {
  std::size_t input_dim = 0;   // observation ++ goal per step
  std::size_t action_dim = 0;  // J
  std::size_t window = 7;      // K + 1
  Wiring wiring = Wiring::V1;
  std::size_t d_model = 64;
  std::size_t heads = 2;
  std::size_t ff_width = 128;
  std::size_t hidden = 128;
  double output_scale = 0.01;  // init scale of the final FC layer

  TrxlConfig trxl() const { return {input_dim, window, d_model, heads, ff_width}; }
  /// Width entering the first FC layer, before any action columns.
  std::size_t fc_input_dim() const { return d_model + (wiring == Wiring::V1 ? input_dim : 0); }
  void validate() const;
};

/// Three FC layers: softplus, softplus, linear.
struct FcStack {
  Linear l1, l2, l3;

  static FcStack init(std::size_t in, std::size_t hidden, std::size_t out, double output_scale,
                      std::mt19937_64& rng);
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

/// Row indices of the last step of every window in a [batch * window, d] stack.
std::vector<std::size_t> last_rows(std::size_t batch, std::size_t window);

class ActorNet {
 public:
  ActorNet(const NetConfig& config, std::uint64_t seed);

  /// windows [batch * window, input_dim] -> actions [batch, action_dim] in [-1, 1].
  /// Throws ContractError on non-finite input.
  Tensor forward(const Tensor& windows) const;

  ParamList parameters() const;
  ActorNet clone() const;
  const NetConfig& config() const { return config_; }

  TrxlBlock block;
  FcStack fc;

 private:
  ActorNet(const NetConfig& config, std::mt19937_64 rng);

  NetConfig config_;
};

struct QPair {
  Tensor q1;  // [batch, 1]
  Tensor q2;
};

class CriticNet {
 public:
  CriticNet(const NetConfig& config, std::uint64_t seed);

  /// windows [batch * window, input_dim], actions [batch, action_dim].
  /// Throws ContractError on non-finite input and NumericError if either
  /// head produces a non-finite value.
  QPair forward(const Tensor& windows, const Tensor& actions) const;

  ParamList parameters() const;
  CriticNet clone() const;
  const NetConfig& config() const { return config_; }

  TrxlBlock block1, block2;
  FcStack fc1, fc2;

 private:
  CriticNet(const NetConfig& config, std::mt19937_64 rng);

  NetConfig config_;
};

}  // namespace conther::nets
