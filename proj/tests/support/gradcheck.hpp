#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "wmsynth/numerics/graph.hpp"
#include "wmsynth/numerics/ops.hpp"

namespace wmsynth::testing {

using numerics::Graph64;
using numerics::Tensor64;
using numerics::Var64;

// Builds a scalar loss from leaf variables bound on `g`.
using ScalarFn = std::function<Var64(Graph64& g, const std::vector<Var64>& leaves)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

// Central differences on every entry of every input, compared to the tape
// gradient. Relative error uses max(|a|, |n|, floor) in the denominator.
inline GradCheckResult gradcheck(const ScalarFn& fn, std::vector<Tensor64> inputs, double h = 1e-6,
                                 double floor = 1e-3) {
  auto eval = [&](const std::vector<Tensor64>& xs) {
    Graph64 g(numerics::GradMode::kInference);
    std::vector<Var64> leaves;
    for (const auto& x : xs) leaves.push_back(g.constant(x));
    return fn(g, leaves).value().item();
  };

  Graph64 g;
  std::vector<Var64> leaves;
  for (const auto& x : inputs) leaves.push_back(g.variable(x));
  g.backward(fn(g, leaves));

  GradCheckResult r;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor64 analytic = g.grad(leaves[k]);
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double x0 = inputs[k][i];
      inputs[k][i] = x0 + h;
      const double fp = eval(inputs);
      inputs[k][i] = x0 - h;
      const double fm = eval(inputs);
      inputs[k][i] = x0;
      const double numeric = (fp - fm) / (2 * h);
      const double a = analytic.size() ? analytic[i] : 0.0;
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      r.max_rel_error = std::max(r.max_rel_error, std::abs(a - numeric) / denom);
      ++r.checked;
    }
  }
  return r;
}

}  // namespace wmsynth::testing
