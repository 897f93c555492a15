#pragma once

#include <vector>

#include "tumornet/nn/gradcheck.hpp"

namespace tumornet::models {

// Composite blocks and miniature end-to-end instances of the three
// architectures, in double precision. Each case checks gradients with respect
// to tissue, theta and every parameter.
std::vector<nn::GradcheckCase> architecture_gradcheck_cases();

// primitive_gradcheck_cases() followed by architecture_gradcheck_cases().
std::vector<nn::GradcheckCase> all_gradcheck_cases();

}  // namespace tumornet::models
