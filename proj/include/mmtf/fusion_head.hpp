#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mmtf/layers.hpp"

namespace mmtf {

// IFV: the concatenated pooled vectors, ViLT branch first.
struct FusedFeature {
  Tensor vector;
};

// Concatenates pooled branch outputs along their last axis. Works on single
// vectors [d] and on batches [B x d].
FusedFeature early_fuse(const Tensor& v_pool, const Tensor& va_pool);
FusedFeature early_fuse(const std::vector<Tensor>& pools);

inline constexpr double kDefaultBaseDropout = 0.5;
inline const std::vector<double> kDefaultSampleRates = {0.1, 0.2, 0.3};

// Multi-sample dropout head: one base dropout, then one dropout per sample
// rate feeding a single shared output layer. An empty `sample_rates` is a
// plain single-dropout head.
class MsdHead {
 public:
  MsdHead() = default;
  MsdHead(ModelParameters& params, const std::string& name,
          std::size_t fused_width, std::size_t classes, double base_dropout,
          std::vector<double> sample_rates, RandomStream& init);
  // Shares an existing output layer instead of registering a new one.
  MsdHead(Linear output_layer, double base_dropout,
          std::vector<double> sample_rates);

  std::size_t sample_count() const {
    return sample_rates.empty() ? 1 : sample_rates.size();
  }

  double base_dropout = kDefaultBaseDropout;
  std::vector<double> sample_rates = kDefaultSampleRates;
  Linear output_layer;
};

// Train: x = D0(ifv); one logit set per sample rate, OL(dropout(x, r_i)),
// with independent masks from `stream`. Eval: every dropout is the identity,
// so the single result OL(ifv) is returned.
std::vector<Tensor> msd_forward(const FusedFeature& ifv, const MsdHead& head,
                                Mode mode, RandomStream* stream);

// Mean of the per-sample cross-entropy losses.
Tensor msd_loss(const std::vector<Tensor>& sample_logits,
                const std::vector<std::size_t>& targets);

// Two gelu dense layers of width `width` per branch, applied before
// concatenation.
class LateFusionHead {
 public:
  LateFusionHead() = default;
  LateFusionHead(ModelParameters& params, const std::string& name,
                 const std::vector<std::size_t>& branch_widths,
                 std::size_t width, Linear output_layer, RandomStream& init);
  LateFusionHead(ModelParameters& params, const std::string& name,
                 const std::vector<std::size_t>& branch_widths,
                 std::size_t width, std::size_t classes, RandomStream& init);

  // Concatenated per-branch stack outputs.
  Tensor features(const std::vector<Tensor>& pools) const;
  std::size_t feature_width() const;

  struct Stack {
    Linear first;
    Linear second;
  };
  std::vector<Stack> stacks;
  Linear output_layer;
};

// OL(features([v_pool, va_pool])).
Tensor late_fuse_forward(const Tensor& v_pool, const Tensor& va_pool,
                         const LateFusionHead& head);

// Argmax over [K] logits; ties resolve to the lowest index. NumericError on
// NaN, ContractError when K < 2.
std::size_t predict(const Tensor& logits);
std::size_t predict(std::span<const double> logits);

}  // namespace mmtf
