#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "mmtf/dataset.hpp"
#include "mmtf/layers.hpp"
#include "mmtf/vocabulary.hpp"

namespace mmtf {

struct EncodingConfig {
  std::size_t max_length = 40;
  std::size_t image_height = 16;
  std::size_t image_width = 16;
  std::size_t patch = 4;
  std::size_t channels = 1;

  std::size_t num_patches() const {
    return (image_height / patch) * (image_width / patch);
  }
  std::size_t patch_dim() const { return patch * patch * channels; }
  // FormatError when the image is not tiled exactly by the patch size;
  // ContractError when max_length cannot hold [CLS] + two [SEP].
  void validate() const;
};

// Model-ready form of one example:
//   [CLS] title [SEP] caption [SEP] [PAD]...   and P flattened patches.
struct PairEncoding {
  std::vector<std::size_t> token_ids;
  std::vector<std::size_t> segment_ids;
  AttentionMask text_mask;
  Tensor patches;  // [P x patch_dim]
  bool has_image_cls = true;

  // Number of leading text positions up to the last attended one.
  std::size_t attended_length() const;
};

// Cuts an [h x w] (or [h x w x c]) image into row-major patches, each
// flattened row-major (channels innermost).
Tensor patchify(const Tensor& image, std::size_t patch);
// Inverse of patchify; returns [h x w] when channels == 1.
Tensor unpatchify(const Tensor& patches, std::size_t height, std::size_t width,
                  std::size_t channels, std::size_t patch);

// Builds the encoding. When the texts do not fit, the title is kept whole
// first and the caption is cut from its end. Throws FormatError for an empty
// title and caption or an image whose size does not match `config`.
PairEncoding encode_pair(const MultimodalExample& example, const Tensor& image,
                         const TokenVocabulary& vocab,
                         const EncodingConfig& config);
// Loads the example's PGM image relative to `image_root` first.
PairEncoding encode_pair(const MultimodalExample& example,
                         const std::filesystem::path& image_root,
                         const TokenVocabulary& vocab,
                         const EncodingConfig& config);

// Which modalities reach the pooled [CLS] state. Text-only ignores every
// image position; image-only ignores every text position except [CLS].
enum class ModalityMask { kBoth, kTextOnly, kImageOnly };

struct BranchConfig {
  std::size_t hidden = 64;
  std::size_t heads = 4;
  std::size_t mlp = 128;
  std::size_t layers = 2;
  double block_dropout = 0.0;
  double ln_eps = 1e-5;
  std::size_t vocab_size = 0;
  std::size_t max_length = 40;
  std::size_t num_patches = 16;
  std::size_t patch_dim = 16;

  BlockConfig block_config() const;
};

struct BranchForwardOptions {
  Mode mode = Mode::kEval;
  RandomStream* dropout_stream = nullptr;
  ModalityMask modality = ModalityMask::kBoth;
  // Drop trailing padded positions before the blocks. Padded keys receive an
  // exactly-zero attention weight, so attended outputs are unchanged.
  bool compact_padding = true;
};

// Jointly trained language encoder whose per-token features replace the
// token embeddings of the VAuLT-style branch.
class AuxLanguageEncoder {
 public:
  AuxLanguageEncoder() = default;
  AuxLanguageEncoder(ModelParameters& params, const std::string& name,
                     const BranchConfig& config, RandomStream& init);

  // [len x hidden] features for `token_ids` (len == token_ids.size()).
  Tensor forward(const std::vector<std::size_t>& token_ids,
                 const AttentionMask& mask, Mode mode,
                 RandomStream* dropout_stream = nullptr) const;

  BranchConfig config;
  Embedding token_embed;
  Embedding position_embed;
  std::vector<TransformerBlock> blocks;
  LayerNorm final_norm;
};

enum class BranchKind { kVilt, kVault };

// Single-stream multimodal transformer: text and image tokens share one
// sequence and one stack of blocks; the pooled output is tanh(W h_[CLS] + b).
class MultimodalBranch {
 public:
  MultimodalBranch() = default;
  MultimodalBranch(ModelParameters& params, const std::string& name,
                   BranchKind kind, const BranchConfig& config,
                   RandomStream& init);

  // `text_features` replaces the token embeddings when defined ([len x d]
  // covering the leading text positions in use); required for kVault.
  Tensor forward(const PairEncoding& encoding, const Tensor& text_features,
                 const BranchForwardOptions& options,
                 AttentionProbe* probe = nullptr) const;

  // Embedded joint stream and its mask, before the blocks.
  std::pair<Tensor, AttentionMask> embed(const PairEncoding& encoding,
                                         const Tensor& text_features,
                                         const BranchForwardOptions& options) const;

  BranchKind kind = BranchKind::kVilt;
  BranchConfig config;
  Embedding token_embed;  // ViLT only
  Embedding text_position_embed;
  Embedding segment_embed;
  Embedding modality_embed;  // row 0 text, row 1 image
  Tensor image_cls;          // [1 x d]
  Embedding image_position_embed;
  Linear patch_projection;
  std::vector<TransformerBlock> blocks;
  LayerNorm final_norm;
  Linear pooler;
};

// Text positions a forward pass uses for this encoding.
std::size_t text_positions_used(const PairEncoding& encoding,
                                const BranchForwardOptions& options);

Tensor vilt_branch_forward(const PairEncoding& encoding,
                           const MultimodalBranch& branch,
                           const BranchForwardOptions& options = {});

Tensor vault_branch_forward(const PairEncoding& encoding,
                            const AuxLanguageEncoder& aux,
                            const MultimodalBranch& branch,
                            const BranchForwardOptions& options = {});

}  // namespace mmtf
