#include <doctest.h>

#include "tumornet/models/gradcheck_cases.hpp"
#include "tumornet/nn/gradcheck.hpp"

using namespace tumornet::nn;

TEST_CASE("gradcheck: primitives and layers") {
  for (const auto& c : primitive_gradcheck_cases()) {
    CAPTURE(c.name);
    const auto r = c.run(GradcheckOptions{});
    CAPTURE(r.worst);
    CHECK(r.checked > 0);
    CHECK(r.max_rel_error <= 1e-3);
  }
}

TEST_CASE("gradcheck: architecture blocks and miniature models") {
  for (const auto& c : tumornet::models::architecture_gradcheck_cases()) {
    CAPTURE(c.name);
    const auto r = c.run(GradcheckOptions{});
    MESSAGE(c.name << " max rel error " << r.max_rel_error << " over " << r.checked);
    CAPTURE(r.worst);
    CHECK(r.checked > 0);
    CHECK(r.max_rel_error <= 1e-3);
  }
}
