#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tumornet/core/rng.hpp"
#include "tumornet/nn/tensor.hpp"

namespace tumornet::nn {

struct GradcheckOptions {
  double h = 1e-4;
  double tol = 1e-3;
  int max_entries = 48;  // per input; larger inputs are checked on a random subset
  std::uint64_t seed = 0;
};

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "input[i] entry j: analytic a, numeric n"
  int checked = 0;
  bool ok = false;
};

// Compares reverse-mode gradients of the scalar `loss()` with respect to
// `inputs` against central differences. Relative error per entry is
// |a - n| / max(|a|, |n|, 1e-3 * max_j |n_j|, 1e4 * eps * max(|L|, 1) / h, 1e-10),
// the fourth term being the rounding noise floor of the difference quotient.
GradcheckResult gradcheck(const std::function<TensorD()>& loss, std::vector<TensorD> inputs,
                          const GradcheckOptions& opts = {});

TensorD random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0);

}  // namespace tumornet::nn

namespace tumornet::nn {

struct GradcheckCase {
  std::string name;
  std::function<GradcheckResult(const GradcheckOptions&)> run;
};

// Every primitive and layer on small random shapes, in double precision.
std::vector<GradcheckCase> primitive_gradcheck_cases();

// Scalar loss sum(f * w) with fixed random weights, so that every output
// element contributes a distinct sensitivity.
TensorD weighted_sum(const TensorD& out, std::uint64_t seed);

}  // namespace tumornet::nn
