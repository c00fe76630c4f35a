#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "conther/ndnum/tensor.hpp"

namespace conther::nd {

struct GradCheckOptions {
  double eps = 1e-6;
  /// Coordinates sampled across all parameters; 0 checks every coordinate.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
};

/// Compares autodiff gradients of the scalar `f` against central differences.
/// Returns max |autodiff - fd| / max(1, |fd|) over the checked coordinates.
/// Parameters are restored exactly afterwards; their grads are left holding
/// the autodiff gradient.
double finite_diff_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                         const GradCheckOptions& options = {});

}  // namespace conther::nd
