#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mmtf/config.hpp"
#include "mmtf/model.hpp"
#include "mmtf/tensor.hpp"
#include "mmtf/vocabulary.hpp"

namespace mmtf {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct ParameterBlob {
  std::string name;
  Shape shape;
  std::vector<double> values;

  bool operator==(const ParameterBlob&) const = default;
};

// Everything needed to rebuild a trained model.
struct Checkpoint {
  TrainConfig config;
  std::size_t epoch = 0;
  double val_loss = 0.0;
  TokenVocabulary vilt_vocab;
  TokenVocabulary vault_vocab;
  std::map<std::string, std::string> rng_states;
  std::vector<ParameterBlob> parameters;
};

// Deep copy of the model's current state.
Checkpoint capture(const MmtfModel& model, std::size_t epoch, double val_loss);

// Rebuilds the model and copies the stored values in. ContractError when a
// stored name or shape does not match the architecture the config builds.
std::unique_ptr<MmtfModel> restore_model(const Checkpoint& checkpoint);

// Binary layout, little-endian:
//   "MMTFCKPT" u32 version, config text, u64 epoch, f64 val_loss,
//   two vocabularies, rng states, parameter blobs (name, u64 rank, u64 dims,
//   f64 values), then a u64 FNV-1a digest of all preceding bytes.
// Strings are u64 length + bytes.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
// FormatError on a bad magic, version, digest or truncated file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mmtf
