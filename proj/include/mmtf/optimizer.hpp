#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mmtf/parameters.hpp"

namespace mmtf {

struct AdamOptions {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected Adam with one moment pair per registered tensor.
class Adam {
 public:
  Adam(const ModelParameters& params, AdamOptions options);

  // Applies one update from the current grads, then zeroes them. Every grad
  // is checked first: a non-finite entry raises NumericError naming the
  // parameter and leaves all values untouched.
  void step(ModelParameters& params);

  std::size_t steps() const { return t_; }
  const AdamOptions& options() const { return options_; }

 private:
  AdamOptions options_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace mmtf
