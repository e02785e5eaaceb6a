#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mmtf/labels.hpp"
#include "mmtf/tensor.hpp"
#include "mmtf/vocabulary.hpp"

namespace mmtf {

// One image/title/caption record. Labels are indices into the task's
// LabelVocabulary; the binary desire label is derived from `desire`.
struct MultimodalExample {
  std::string id;
  std::string title;
  std::string caption;
  std::string image_path;  // relative to the split file's directory
  std::optional<std::size_t> sentiment;
  std::optional<std::size_t> emotion;
  std::optional<std::size_t> desire;

  std::optional<std::size_t> label(Task task) const;

  bool operator==(const MultimodalExample&) const = default;
};

inline constexpr std::array<std::string_view, 3> kSplitNames = {"train", "val",
                                                                "test"};

// Path of one split's record file inside a dataset directory.
std::filesystem::path split_file(const std::filesystem::path& dataset_dir,
                                 std::string_view split);

// Parses a line-record file (one JSON object per line with id, title,
// caption, image_path and a labels object). Every record must carry the
// label `task` needs (desire for binary_desire) and an existing image file.
// Malformed lines raise ParseError naming the line; bad labels LabelError;
// missing images FormatError naming the record id.
std::vector<MultimodalExample> load_dataset(const std::filesystem::path& path,
                                            Task task);
// Same parsing without task or image checks.
std::vector<MultimodalExample> load_records(const std::filesystem::path& path);

void write_records(const std::filesystem::path& path,
                   const std::vector<MultimodalExample>& examples);
std::string record_to_line(const MultimodalExample& example);

// Vocabulary over titles and captions of `examples` (the training split).
TokenVocabulary build_vocab(const std::vector<MultimodalExample>& examples);

// Reads a binary PGM (P5, maxval 255) and returns [h x w] pixels in [0, 1].
Tensor load_image(const std::filesystem::path& path);

struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};
GrayImage read_pgm(const std::filesystem::path& path);
// Pixels scaled by 1/255 into an [h x w] tensor.
Tensor image_tensor(const GrayImage& image);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

// Converts an MSED-style CSV (header row naming id/title/caption/image and
// the sentiment/emotion/desire columns) into the native record format.
// Images are referenced as-is and must already be PGM files at the model's
// input size. Returns the number of converted records.
std::size_t import_msed_csv(const std::filesystem::path& csv_path,
                            const std::filesystem::path& output_path);

// 64-bit FNV-1a over a file's bytes, as 16 lowercase hex digits.
std::string file_checksum(const std::filesystem::path& path);

}  // namespace mmtf
