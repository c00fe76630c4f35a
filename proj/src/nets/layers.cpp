#include "conther/nets/layers.hpp"

#include <cmath>

#include "conther/error.hpp"

namespace conther::nets {

Linear Linear::init(std::size_t in, std::size_t out, std::mt19937_64& rng, double scale) {
  const double bound = scale / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> w(in * out);
  for (auto& v : w) v = dist(rng);
  std::vector<double> b(out);
  for (auto& v : b) v = dist(rng);
  return {Tensor::from({in, out}, std::move(w), true), Tensor::from({out}, std::move(b), true)};
}

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

LayerNorm LayerNorm::init(std::size_t width) {
  return {Tensor::full({width}, 1.0, true), Tensor::zeros({width}, true)};
}

void LayerNorm::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".gain", gain});
  out.push_back({prefix + ".bias", bias});
}

void check_same_tree(const ParamList& a, const ParamList& b) {
  if (a.size() != b.size()) {
    throw ContractError("parameter trees differ in size: " + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()));
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || a[i].tensor.shape() != b[i].tensor.shape()) {
      throw ContractError("parameter trees differ at entry " + std::to_string(i) + ": " + a[i].name + " " +
                          nd::shape_string(a[i].tensor.shape()) + " vs " + b[i].name + " " +
                          nd::shape_string(b[i].tensor.shape()));
    }
  }
}

void copy_parameters(const ParamList& target, const ParamList& source) {
  check_same_tree(target, source);
  for (std::size_t i = 0; i < target.size(); ++i) {
    Tensor t = target[i].tensor;
    auto dst = t.mutable_data();
    auto src = source[i].tensor.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

void soft_update(const ParamList& target, const ParamList& source, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ContractError("soft_update: tau must lie in [0, 1]");
  check_same_tree(target, source);
  for (std::size_t i = 0; i < target.size(); ++i) {
    Tensor t = target[i].tensor;
    auto dst = t.mutable_data();
    auto src = source[i].tensor.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = tau * src[k] + (1.0 - tau) * dst[k];
  }
}

std::size_t parameter_count(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.size();
  return n;
}

}  // namespace conther::nets
