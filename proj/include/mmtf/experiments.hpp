#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mmtf/config.hpp"
#include "mmtf/metrics.hpp"
#include "mmtf/trainer.hpp"

namespace mmtf {

// Candidate values per config key, in enumeration order. The grid is
// enumerated with the last key varying fastest.
using SweepSpace = std::vector<std::pair<std::string, std::vector<std::string>>>;

// The reference search space over train/eval batch size, max length,
// learning rate, epochs and the base dropout (48,000 points).
SweepSpace reference_sweep_space();

struct SweepRow {
  std::size_t index = 0;  // position in grid enumeration
  std::vector<std::pair<std::string, std::string>> overrides;
  TrainConfig config;
  double val_macro_f1 = 0.0;
  double val_loss = 0.0;
  double test_macro_f1 = 0.0;
};

struct SweepReport {
  std::size_t grid_size = 0;
  std::vector<SweepRow> rows;  // ranked, best first

  std::string table() const;
};

// Every grid point when budget >= grid size, otherwise `budget` points drawn
// with a stream seeded by base.seed (kept in enumeration order). Each point
// is trained on `data` and ranked by validation macro-F1, ties by earlier
// enumeration. ContractError on budget 0 or an empty space.
SweepReport sweep(const SweepSpace& space, std::size_t budget,
                  const TrainConfig& base, const DatasetSplits& data);

// Grid point count; ContractError when any key has no candidates.
std::size_t grid_size(const SweepSpace& space);

struct AblationCell {
  Fusion fusion = Fusion::kEarly;
  bool msd = true;
  Branches branches = Branches::kBoth;
  bool flagged = false;  // late fusion with MSD on
  std::size_t parameter_count = 0;
  double val_macro_f1 = 0.0;
  MetricsReport test;
};

struct AblationReport {
  std::vector<AblationCell> cells;

  const AblationCell& cell(Fusion fusion, bool msd, Branches branches) const;
  std::string table() const;
  std::string to_jsonl() const;
};

// Trains {early, late} x {msd on, off} x {both, vilt_only, vault_only}
// from `base` with its seed, in that order, and evaluates on test.
AblationReport ablate(const TrainConfig& base, const DatasetSplits& data);

}  // namespace mmtf
