#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mmtf/tensor.hpp"

namespace mmtf {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct GradCheckOptions {
  double h = 1e-5;
  double tolerance = 1e-4;
  // 0 checks every entry of every tensor. Otherwise entries are drawn by
  // picking a tensor uniformly, then an entry uniformly within it.
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

struct GradCheckEntry {
  std::string name;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_relative_error = 0.0;
  double mean_relative_error = 0.0;
  bool passed = false;
};

// |a - n| / max(|a|, |n|, 1e-12)
double relative_error(double analytic, double numeric);

// Compares reverse-mode gradients of `loss_fn` against central differences.
// `loss_fn` must be deterministic; two differing evaluations at the same
// point raise DeterminismError. Grads on `params` are zeroed before and
// after the check.
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn,
                           const std::vector<NamedTensor>& params,
                           const GradCheckOptions& options = {});

}  // namespace mmtf
