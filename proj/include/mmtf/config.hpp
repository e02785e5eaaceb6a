#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mmtf/encoders.hpp"
#include "mmtf/labels.hpp"

namespace mmtf {

enum class Fusion { kEarly, kLate };
enum class Branches { kBoth, kViltOnly, kVaultOnly };

std::string_view fusion_name(Fusion f);
std::string_view branches_name(Branches b);
std::string_view modality_name(ModalityMask m);

struct ModelConfig {
  std::size_t hidden = 64;
  std::size_t heads = 4;
  std::size_t mlp = 128;
  std::size_t layers = 2;      // per branch
  std::size_t aux_layers = 2;  // language encoder of the VAuLT branch
  double block_dropout = 0.0;
  double ln_eps = 1e-5;
  std::size_t late_width = 64;
  std::size_t image_height = 16;
  std::size_t image_width = 16;
  std::size_t patch = 4;
  std::size_t channels = 1;
};

// Everything needed to reproduce one training run. Serialized as flat
// dotted key = value lines.
struct TrainConfig {
  Task task = Task::kSentiment;
  std::size_t train_batch = 4;
  std::size_t eval_batch = 1;
  double learning_rate = 3e-4;
  std::size_t max_length = 40;
  double d0_dropout = 0.5;
  std::vector<double> msd_rates = {0.1, 0.2, 0.3};
  std::size_t epochs = 5;
  std::uint64_t seed = 7;
  Fusion fusion = Fusion::kEarly;
  Branches branches = Branches::kBoth;
  bool msd = true;
  ModalityMask modality = ModalityMask::kBoth;
  ModelConfig model;

  // Throws ConfigError naming the offending field.
  void validate() const;
  EncodingConfig encoding() const;
  std::size_t classes() const { return LabelVocabulary::for_task(task).size(); }
  // Late fusion with MSD on is permitted but not the studied configuration.
  bool flagged_combination() const { return fusion == Fusion::kLate && msd; }

  std::vector<std::pair<std::string, std::string>> to_key_values() const;
  std::string to_text() const;
  // Throws ConfigError naming `key` when it is unknown or `value` invalid.
  void set(std::string_view key, std::string_view value);
  // Applies the lines of `text` on top of `base` (defaults when omitted).
  static TrainConfig from_text(std::string_view text);
  static TrainConfig from_text(std::string_view text, const TrainConfig& base);
  static TrainConfig from_file(const std::filesystem::path& path);
  static TrainConfig from_file(const std::filesystem::path& path,
                               const TrainConfig& base);
};

// Desk-scale defaults: the reference per-task batch size and dropout, the
// small model above and learning rate 3e-4.
TrainConfig desk_preset(Task task);
// Reference per-task settings with the full-size model (768 wide, 12 heads,
// 12 layers, 224px RGB, patch 32) and learning rates 3e-3 / 2.99e-3 / 3.1e-3.
TrainConfig full_scale_preset(Task task);
// full_scale_preset with learning rate 3e-5.
TrainConfig full_scale_low_lr_preset(Task task);

}  // namespace mmtf
