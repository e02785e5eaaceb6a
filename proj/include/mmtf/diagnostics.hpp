#pragma once

#include <cstdint>

#include "mmtf/config.hpp"
#include "mmtf/grad_check.hpp"

namespace mmtf {

enum class CheckDropout {
  kDisabled,  // every dropout rate set to 0
  kFrozen,    // train-mode masks replayed identically on every evaluation
};

// Finite-difference check of the whole model: a fresh model built from
// `config` with seed `seed`, a 2-example synthetic batch and the training
// loss (MSD when on).
GradCheckReport end_to_end_grad_check(const TrainConfig& config, std::uint64_t seed,
                                      const GradCheckOptions& options,
                                      CheckDropout dropout = CheckDropout::kDisabled);

}  // namespace mmtf
