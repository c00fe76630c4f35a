#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "conther/ndnum/ops.hpp"
#include "conther/ndnum/tensor.hpp"

namespace conther::nets {

using nd::ParamList;
using nd::Tensor;

/// Fully connected layer, x [m, in] -> [m, out]. Weights and biases start
/// uniform in +-scale/sqrt(in).
struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  static Linear init(std::size_t in, std::size_t out, std::mt19937_64& rng, double scale = 1.0);
  Tensor forward(const Tensor& x) const { return nd::add_row(nd::matmul(x, weight), bias); }
  std::size_t in_dim() const { return weight.dim(0); }
  std::size_t out_dim() const { return weight.dim(1); }
  void collect(const std::string& prefix, ParamList& out) const;
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;

  static LayerNorm init(std::size_t width);
  Tensor forward(const Tensor& x) const { return nd::layer_norm(x, gain, bias); }
  void collect(const std::string& prefix, ParamList& out) const;
};

/// Copies values from `source` into `target` after checking the two lists
/// name and shape every entry identically.
void copy_parameters(const ParamList& target, const ParamList& source);

/// theta' <- tau * theta + (1 - tau) * theta' for every parameter.
/// Throws ContractError on tau outside [0, 1] or mismatched trees.
void soft_update(const ParamList& target, const ParamList& source, double tau);

/// Throws ContractError unless the lists agree on names and shapes.
void check_same_tree(const ParamList& a, const ParamList& b);

std::size_t parameter_count(const ParamList& params);

}  // namespace conther::nets
