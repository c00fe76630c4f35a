#include "conther/ndnum/adam.hpp"

#include <cmath>

#include "conther/error.hpp"

namespace conther::nd {

void adam_step(std::span<double> param, std::span<const double> grad, AdamMoments& moments,
               std::uint64_t step, double lr, const AdamHyper& hyper) {
  if (param.size() != grad.size()) {
    throw DimensionError("adam_step: parameter has " + std::to_string(param.size()) +
                         " values but gradient has " + std::to_string(grad.size()));
  }
  if (!(lr > 0.0)) throw ContractError("adam_step: learning rate must be positive");
  if (step == 0) throw ContractError("adam_step: step numbers start at 1");
  if (moments.first.size() != param.size()) moments.first.assign(param.size(), 0.0);
  if (moments.second.size() != param.size()) moments.second.assign(param.size(), 0.0);

  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    double& m = moments.first[i];
    double& v = moments.second[i];
    m = hyper.beta1 * m + (1.0 - hyper.beta1) * g;
    v = hyper.beta2 * v + (1.0 - hyper.beta2) * g * g;
    const double m_hat = m / c1;
    const double v_hat = v / c2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
  }
}

Adam::Adam(ParamList params, double lr, AdamHyper hyper)
    : params_(std::move(params)), moments_(params_.size()), lr_(lr), hyper_(hyper) {
  if (!(lr > 0.0)) throw ContractError("Adam: learning rate must be positive");
}

void Adam::zero_grad() { zero_grads(params_); }

void Adam::step() {
  const std::uint64_t next = step_count_ + 1;
  // Validate everything first so a bad gradient leaves all parameters untouched.
  for (const auto& p : params_) {
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient in parameter '" + p.name + "' at optimizer step " +
                           std::to_string(next));
      }
    }
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor t = params_[i].tensor;
    // A parameter never reached by backward gets a zero gradient.
    auto grad = t.mutable_grad();
    adam_step(t.mutable_data(), grad, moments_[i], next, lr_, hyper_);
  }
  step_count_ = next;
}

}  // namespace conther::nd
