#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "conther/ndnum/tensor.hpp"

namespace conther::nd {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates for one parameter tensor.
struct AdamMoments {
  std::vector<double> first;
  std::vector<double> second;
};

/// One bias-corrected Adam update of `param` in place. `step` is the 1-based
/// step number after incrementing.
void adam_step(std::span<double> param, std::span<const double> grad, AdamMoments& moments,
               std::uint64_t step, double lr, const AdamHyper& hyper);

/// Adam over a named parameter list. Throws NumericError naming the parameter
/// and step when a gradient is not finite.
class Adam {
 public:
  Adam(ParamList params, double lr, AdamHyper hyper = {});

  void zero_grad();
  void step();

  std::uint64_t step_count() const { return step_count_; }
  double lr() const { return lr_; }
  const AdamHyper& hyper() const { return hyper_; }
  const std::vector<AdamMoments>& moments() const { return moments_; }
  const ParamList& params() const { return params_; }

 private:
  ParamList params_;
  std::vector<AdamMoments> moments_;
  double lr_;
  AdamHyper hyper_;
  std::uint64_t step_count_ = 0;
};

}  // namespace conther::nd
