#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmtf/dataset.hpp"
#include "mmtf/labels.hpp"

namespace mmtf {

// Classes sit on a grid of `groups` x `members`. The title carries the
// group (signature tokens), the image carries the member (a bright block in
// one quadrant), so only both modalities together identify the class.
// Two classes use a parity grid instead: label = (group + member) % 2.
struct ClassGrid {
  std::size_t classes = 0;
  std::size_t groups = 0;
  std::size_t members = 0;
  bool parity = false;

  static ClassGrid for_classes(std::size_t k);
  // Class of a (group, member) cell.
  std::size_t label(std::size_t group, std::size_t member) const;
  // Every (group, member) cell carrying class `c`.
  std::vector<std::pair<std::size_t, std::size_t>> cells(std::size_t c) const;
};

inline constexpr std::size_t kSignatureTokensPerGroup = 3;
// Signature token `j` of group `g`, e.g. "sig2b".
std::string signature_token(std::size_t group, std::size_t j);

struct SyntheticSpec {
  Task task = Task::kSentiment;
  std::size_t n_train = 600;
  std::size_t n_val = 100;
  std::size_t n_test = 200;
  // Relative class weights; empty means uniform. Per-split class counts are
  // the largest-remainder apportionment of the split size.
  std::vector<double> class_balance;
  std::uint64_t seed = 7;
  // Fraction of examples (per split, rounded) whose text or image is
  // replaced by another cell's content while the label stays.
  double noise_rate = 0.0;
  std::size_t image_size = 16;

  void validate() const;
};

// Exact per-class counts for a split of `n` examples.
std::vector<std::size_t> class_counts(const SyntheticSpec& spec, std::size_t n);

struct SyntheticItem {
  MultimodalExample example;  // image_path is "images/<id>.pgm"
  GrayImage image;
};

// One split ("train", "val" or "test") built in memory.
std::vector<SyntheticItem> synthesize_split(const SyntheticSpec& spec,
                                            std::string_view split);

struct SyntheticSummary {
  std::filesystem::path manifest;
  std::vector<std::vector<std::size_t>> counts;  // per split, per class
};

// Writes train/val/test records, images/*.pgm and manifest.json into `dir`.
// Identical specs give byte-identical output.
SyntheticSummary generate_synthetic(const SyntheticSpec& spec,
                                    const std::filesystem::path& dir);

}  // namespace mmtf
