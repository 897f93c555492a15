#include "tumornet/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace tumornet::nn {

TensorD random_tensor(const Shape& shape, Rng& rng, double lo, double hi) {
  TensorD t(shape);
  for (std::int64_t i = 0; i < t.numel(); ++i) t.value()[i] = uniform(rng, lo, hi);
  return t;
}

GradcheckResult gradcheck(const std::function<TensorD()>& loss, std::vector<TensorD> inputs,
                          const GradcheckOptions& opts) {
  for (auto& x : inputs) {
    x.set_requires_grad(true);
    x.zero_grad();
  }
  double loss_scale = 0.0;
  {
    Tape<double> tape;
    TapeScope<double> scope(tape);
    const auto l = loss();
    loss_scale = std::abs(l.item());
    tape.backward(l);
  }
  // Rounding noise of a central difference: the loss itself carries error of
  // roughly eps * |L| amplified by summation depth.
  const double noise = 1e4 * std::numeric_limits<double>::epsilon() * std::max(loss_scale, 1.0) / opts.h;
  GradcheckResult r;
  Rng rng(opts.seed);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto& x = inputs[k];
    std::vector<std::int64_t> idx(static_cast<std::size_t>(x.numel()));
    std::iota(idx.begin(), idx.end(), 0);
    if (static_cast<int>(idx.size()) > opts.max_entries) {
      for (int i = 0; i < opts.max_entries; ++i) {
        std::swap(idx[i], idx[i + uniform_index(rng, idx.size() - i)]);
      }
      idx.resize(opts.max_entries);
    }
    std::vector<double> analytic, numeric;
    for (auto j : idx) {
      const double a = x.has_grad() ? x.grad()[j] : 0.0;
      const double v = x.value()[j];
      x.value()[j] = v + opts.h;
      const double fp = loss().item();
      x.value()[j] = v - opts.h;
      const double fm = loss().item();
      x.value()[j] = v;
      analytic.push_back(a);
      numeric.push_back((fp - fm) / (2 * opts.h));
    }
    double scale = 0.0;
    for (double n : numeric) scale = std::max(scale, std::abs(n));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const double a = analytic[i], n = numeric[i];
      const double denom = std::max({std::abs(a), std::abs(n), 1e-3 * scale, noise, 1e-10});
      const double e = std::abs(a - n) / denom;
      ++r.checked;
      if (e > r.max_rel_error || r.worst.empty()) {
        r.max_rel_error = std::max(r.max_rel_error, e);
        if (e >= r.max_rel_error) {
          char buf[160];
          std::snprintf(buf, sizeof buf, "input[%zu] entry %lld: analytic %.9g, numeric %.9g", k,
                        static_cast<long long>(idx[i]), a, n);
          r.worst = buf;
        }
      }
    }
  }
  r.ok = r.max_rel_error <= opts.tol;
  return r;
}

}  // namespace tumornet::nn
