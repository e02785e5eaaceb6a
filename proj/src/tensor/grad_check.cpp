#include "mmtf/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mmtf/errors.hpp"

namespace mmtf {

double relative_error(double analytic, double numeric) {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), 1e-12});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const std::function<Tensor()>& loss_fn,
                           const std::vector<NamedTensor>& params,
                           const GradCheckOptions& options) {
  if (!(options.h > 0.0) || !(options.tolerance > 0.0)) {
    throw ContractError("grad_check: h and tolerance must be positive");
  }
  if (params.empty()) throw ContractError("grad_check: no parameters");

  auto evaluate = [&loss_fn] {
    const Tensor loss = loss_fn();
    if (loss.numel() != 1) {
      throw ContractError("grad_check: loss must be scalar, got " +
                          shape_to_string(loss.shape()));
    }
    return loss;
  };

  std::vector<Tensor> tensors;
  for (const auto& p : params) tensors.push_back(p.tensor);
  for (auto& t : tensors) t.zero_grad();

  const Tensor loss = evaluate();
  const double again = evaluate().item();
  if (loss.item() != again) {
    throw DeterminismError("grad_check: loss changed between evaluations (" +
                           std::to_string(loss.item()) + " vs " +
                           std::to_string(again) + ")");
  }
  backward(loss);

  std::vector<std::pair<std::size_t, std::size_t>> picks;
  if (options.samples == 0) {
    for (std::size_t p = 0; p < tensors.size(); ++p) {
      for (std::size_t i = 0; i < tensors[p].numel(); ++i) picks.emplace_back(p, i);
    }
  } else {
    std::mt19937_64 rng(options.seed);
    for (std::size_t s = 0; s < options.samples; ++s) {
      const std::size_t p = rng() % tensors.size();
      picks.emplace_back(p, rng() % tensors[p].numel());
    }
  }

  GradCheckReport report;
  double total = 0.0;
  for (const auto& [p, i] : picks) {
    Tensor& t = tensors[p];
    const double analytic = t.has_grad() ? t.grad()[i] : 0.0;
    auto values = t.mutable_data();
    const double original = values[i];
    values[i] = original + options.h;
    const double up = evaluate().item();
    values[i] = original - options.h;
    const double down = evaluate().item();
    values[i] = original;
    const double numeric = (up - down) / (2.0 * options.h);
    GradCheckEntry e{params[p].name, i, analytic, numeric,
                     relative_error(analytic, numeric)};
    report.max_relative_error = std::max(report.max_relative_error, e.relative_error);
    total += e.relative_error;
    report.entries.push_back(std::move(e));
  }
  report.mean_relative_error = total / static_cast<double>(picks.size());
  report.passed = report.max_relative_error < options.tolerance;
  for (auto& t : tensors) t.zero_grad();
  return report;
}

}  // namespace mmtf
