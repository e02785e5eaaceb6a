#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mmtf/checkpoint.hpp"
#include "mmtf/config.hpp"
#include "mmtf/dataset.hpp"
#include "mmtf/metrics.hpp"
#include "mmtf/model.hpp"

namespace mmtf {

// The three splits of a dataset directory plus the directory images are
// resolved against.
struct DatasetSplits {
  std::filesystem::path root;
  std::vector<MultimodalExample> train;
  std::vector<MultimodalExample> val;
  std::vector<MultimodalExample> test;

  const std::vector<MultimodalExample>& split(std::string_view name) const;
};

DatasetSplits load_splits(const std::filesystem::path& dir, Task task);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  std::size_t steps = 0;
  double train_loss = 0.0;  // example-weighted mean over the epoch
  double val_loss = 0.0;
  double val_macro_f1 = 0.0;
  bool best = false;

  bool operator==(const EpochLog&) const = default;
  // One JSON object, doubles printed with %.17g.
  std::string to_json() const;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochLog> log;
  std::unique_ptr<MmtfModel> model;  // restored from `best`
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Builds both vocabularies from the training split, then runs seeded
// shuffled mini-batch Adam for config.epochs epochs, keeping the parameters
// of the epoch with the lowest validation loss. ContractError on an empty
// train or val split.
TrainResult train(const TrainConfig& config, const DatasetSplits& data,
                  const EpochCallback& on_epoch = {});

std::vector<EncodedExample> encode_examples(const MmtfModel& model,
                                            const std::vector<MultimodalExample>& examples,
                                            const std::filesystem::path& image_root);

struct EvalOutcome {
  double loss = 0.0;  // mean cross-entropy of the eval-mode logits
  std::vector<std::size_t> predictions;
  std::vector<std::size_t> golds;
  MetricsReport metrics;
};

// Eval-mode pass in batches of config.eval_batch. Results do not depend on
// the batch size or on example order (beyond the order of `predictions`).
EvalOutcome evaluate_encoded(MmtfModel& model,
                             const std::vector<EncodedExample>& examples);

MetricsReport evaluate(MmtfModel& model,
                       const std::vector<MultimodalExample>& examples,
                       const std::filesystem::path& image_root);
MetricsReport evaluate(const Checkpoint& checkpoint,
                       const std::vector<MultimodalExample>& examples,
                       const std::filesystem::path& image_root);

std::string metrics_to_json(const MetricsReport& report);

}  // namespace mmtf
