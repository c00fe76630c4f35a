#include "conther/ndnum/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "conther/error.hpp"

namespace conther::nd {

double finite_diff_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                         const GradCheckOptions& options) {
  if (!(options.eps > 0.0)) throw ContractError("finite_diff_check: eps must be positive");

  for (auto p : params) p.zero_grad();
  f().backward();

  // (parameter index, coordinate) pairs
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t j = 0; j < params[i].size(); ++j) coords.emplace_back(i, j);
  }
  if (options.max_coords > 0 && coords.size() > options.max_coords) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coords);
  }

  double worst = 0.0;
  for (auto [i, j] : coords) {
    Tensor p = params[i];
    auto values = p.mutable_data();
    const double original = values[j];
    double plus = 0.0, minus = 0.0;
    {
      NoGradGuard guard;
      values[j] = original + options.eps;
      plus = f().item();
      values[j] = original - options.eps;
      minus = f().item();
    }
    values[j] = original;
    const double numeric = (plus - minus) / (2.0 * options.eps);
    const auto grad = p.grad();
    const double analytic = grad.empty() ? 0.0 : grad[j];
    worst = std::max(worst, std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric)));
  }
  return worst;
}

}  // namespace conther::nd
