#include "mmtf/fusion_head.hpp"

#include <cmath>

#include "mmtf/errors.hpp"
#include "mmtf/ops.hpp"

namespace mmtf {

FusedFeature early_fuse(const Tensor& v_pool, const Tensor& va_pool) {
  return early_fuse(std::vector<Tensor>{v_pool, va_pool});
}

FusedFeature early_fuse(const std::vector<Tensor>& pools) {
  if (pools.empty()) throw ContractError("early_fuse: no pooled vectors");
  for (const auto& p : pools) {
    for (double v : p.data()) {
      if (!std::isfinite(v)) throw NumericError("early_fuse: non-finite pooled value");
    }
  }
  if (pools.size() == 1) return {pools.front()};
  return {ops::concat(pools, pools.front().rank() - 1)};
}

namespace {

void check_rates(double base, const std::vector<double>& rates) {
  auto ok = [](double r) { return r >= 0.0 && r < 1.0; };
  if (!ok(base)) {
    throw ContractError("base dropout " + std::to_string(base) + " outside [0, 1)");
  }
  for (double r : rates) {
    if (!ok(r)) {
      throw ContractError("sample dropout " + std::to_string(r) + " outside [0, 1)");
    }
  }
}

}  // namespace

MsdHead::MsdHead(ModelParameters& params, const std::string& name,
                 std::size_t fused_width, std::size_t classes,
                 double base, std::vector<double> rates, RandomStream& init)
    : base_dropout(base),
      sample_rates(std::move(rates)),
      output_layer(params, name + ".output", fused_width, classes, init) {
  check_rates(base_dropout, sample_rates);
}

MsdHead::MsdHead(Linear output, double base, std::vector<double> rates)
    : base_dropout(base), sample_rates(std::move(rates)),
      output_layer(std::move(output)) {
  check_rates(base_dropout, sample_rates);
}

std::vector<Tensor> msd_forward(const FusedFeature& ifv, const MsdHead& head,
                                Mode mode, RandomStream* stream) {
  if (mode == Mode::kEval) return {head.output_layer.forward(ifv.vector)};
  const Tensor x = dropout(ifv.vector, {head.base_dropout, mode, stream});
  if (head.sample_rates.empty()) return {head.output_layer.forward(x)};
  std::vector<Tensor> samples;
  samples.reserve(head.sample_rates.size());
  for (double rate : head.sample_rates) {
    samples.push_back(head.output_layer.forward(dropout(x, {rate, mode, stream})));
  }
  return samples;
}

Tensor msd_loss(const std::vector<Tensor>& sample_logits,
                const std::vector<std::size_t>& targets) {
  if (sample_logits.empty()) throw ContractError("msd_loss: no samples");
  if (sample_logits.size() == 1) return ops::cross_entropy(sample_logits[0], targets);
  Tensor total = ops::cross_entropy(sample_logits[0], targets);
  for (std::size_t i = 1; i < sample_logits.size(); ++i) {
    total = ops::add(total, ops::cross_entropy(sample_logits[i], targets));
  }
  return ops::scale(total, 1.0 / static_cast<double>(sample_logits.size()));
}

LateFusionHead::LateFusionHead(ModelParameters& params, const std::string& name,
                               const std::vector<std::size_t>& branch_widths,
                               std::size_t width, Linear output,
                               RandomStream& init)
    : output_layer(std::move(output)) {
  for (std::size_t b = 0; b < branch_widths.size(); ++b) {
    const std::string prefix = name + ".stack" + std::to_string(b);
    Stack s;
    s.first = Linear(params, prefix + ".first", branch_widths[b], width, init);
    s.second = Linear(params, prefix + ".second", width, width, init);
    stacks.push_back(std::move(s));
  }
  if (output_layer.weight.defined() &&
      output_layer.in_features() != feature_width()) {
    throw DimensionError("late fusion output layer expects " +
                         std::to_string(output_layer.in_features()) +
                         " inputs, stacks produce " +
                         std::to_string(feature_width()));
  }
}

LateFusionHead::LateFusionHead(ModelParameters& params, const std::string& name,
                               const std::vector<std::size_t>& branch_widths,
                               std::size_t width, std::size_t classes,
                               RandomStream& init)
    : LateFusionHead(params, name, branch_widths, width, Linear(), init) {
  output_layer = Linear(params, name + ".output", feature_width(), classes, init);
}

std::size_t LateFusionHead::feature_width() const {
  std::size_t w = 0;
  for (const auto& s : stacks) w += s.second.out_features();
  return w;
}

Tensor LateFusionHead::features(const std::vector<Tensor>& pools) const {
  if (pools.size() != stacks.size()) {
    throw DimensionError("late fusion has " + std::to_string(stacks.size()) +
                         " stacks but got " + std::to_string(pools.size()) +
                         " pooled inputs");
  }
  std::vector<Tensor> parts;
  for (std::size_t b = 0; b < pools.size(); ++b) {
    const auto& s = stacks[b];
    parts.push_back(ops::gelu(s.second.forward(ops::gelu(s.first.forward(pools[b])))));
  }
  if (parts.size() == 1) return parts.front();
  return ops::concat(parts, parts.front().rank() - 1);
}

Tensor late_fuse_forward(const Tensor& v_pool, const Tensor& va_pool,
                         const LateFusionHead& head) {
  return head.output_layer.forward(head.features({v_pool, va_pool}));
}

std::size_t predict(std::span<const double> logits) {
  if (logits.size() < 2) throw ContractError("predict needs at least 2 classes");
  std::size_t best = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (std::isnan(logits[i])) throw NumericError("predict: NaN logit");
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

std::size_t predict(const Tensor& logits) { return predict(logits.data()); }

}  // namespace mmtf
