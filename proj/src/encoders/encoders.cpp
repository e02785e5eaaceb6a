#include "mmtf/encoders.hpp"

#include <algorithm>

#include "mmtf/errors.hpp"
#include "mmtf/ops.hpp"

namespace mmtf {

void EncodingConfig::validate() const {
  if (patch == 0 || channels == 0 || image_height == 0 || image_width == 0) {
    throw FormatError("image and patch sizes must be positive");
  }
  if (image_height % patch != 0 || image_width % patch != 0) {
    throw FormatError("image " + std::to_string(image_height) + "x" +
                      std::to_string(image_width) +
                      " is not divisible by patch size " + std::to_string(patch));
  }
  if (max_length < 3) {
    throw ContractError("max_length " + std::to_string(max_length) +
                        " cannot hold [CLS] and two [SEP] tokens");
  }
}

std::size_t PairEncoding::attended_length() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < text_mask.size(); ++i) {
    if (text_mask[i] == MaskValue::kAttend) n = i + 1;
  }
  return n;
}

Tensor patchify(const Tensor& image, std::size_t patch) {
  if (image.rank() != 2 && image.rank() != 3) {
    throw DimensionError("patchify expects [h x w] or [h x w x c], got " +
                         shape_to_string(image.shape()));
  }
  const std::size_t h = image.dim(0), w = image.dim(1);
  const std::size_t c = image.rank() == 3 ? image.dim(2) : 1;
  if (patch == 0 || h % patch != 0 || w % patch != 0) {
    throw FormatError("image " + shape_to_string(image.shape()) +
                      " is not divisible by patch size " + std::to_string(patch));
  }
  const std::size_t rows = h / patch, cols = w / patch;
  const std::size_t dim = patch * patch * c;
  const auto src = image.data();
  std::vector<double> out(rows * cols * dim);
  for (std::size_t pr = 0; pr < rows; ++pr) {
    for (std::size_t pc = 0; pc < cols; ++pc) {
      double* dst = out.data() + (pr * cols + pc) * dim;
      for (std::size_t y = 0; y < patch; ++y) {
        const double* row = src.data() + ((pr * patch + y) * w + pc * patch) * c;
        std::copy_n(row, patch * c, dst + y * patch * c);
      }
    }
  }
  return Tensor::from({rows * cols, dim}, std::move(out));
}

Tensor unpatchify(const Tensor& patches, std::size_t height, std::size_t width,
                  std::size_t channels, std::size_t patch) {
  const std::size_t rows = height / patch, cols = width / patch;
  const std::size_t dim = patch * patch * channels;
  if (patches.rank() != 2 || patches.dim(0) != rows * cols ||
      patches.dim(1) != dim) {
    throw DimensionError("patches " + shape_to_string(patches.shape()) +
                         " do not tile a " + std::to_string(height) + "x" +
                         std::to_string(width) + " image");
  }
  const auto src = patches.data();
  std::vector<double> out(height * width * channels);
  for (std::size_t pr = 0; pr < rows; ++pr) {
    for (std::size_t pc = 0; pc < cols; ++pc) {
      const double* from = src.data() + (pr * cols + pc) * dim;
      for (std::size_t y = 0; y < patch; ++y) {
        std::copy_n(from + y * patch * channels, patch * channels,
                    out.data() + ((pr * patch + y) * width + pc * patch) * channels);
      }
    }
  }
  Shape shape = channels == 1 ? Shape{height, width}
                              : Shape{height, width, channels};
  return Tensor::from(std::move(shape), std::move(out));
}

PairEncoding encode_pair(const MultimodalExample& example, const Tensor& image,
                         const TokenVocabulary& vocab,
                         const EncodingConfig& config) {
  config.validate();
  const Shape expected =
      config.channels == 1
          ? Shape{config.image_height, config.image_width}
          : Shape{config.image_height, config.image_width, config.channels};
  if (image.shape() != expected) {
    throw FormatError("record " + example.id + ": image is " +
                      shape_to_string(image.shape()) + ", expected " +
                      shape_to_string(expected));
  }
  const auto title = tokenize(example.title);
  const auto caption = tokenize(example.caption);
  if (title.empty() && caption.empty()) {
    throw FormatError("record " + example.id + " has empty title and caption");
  }
  const std::size_t budget = config.max_length - 3;
  const std::size_t title_keep = std::min(title.size(), budget);
  const std::size_t caption_keep = std::min(caption.size(), budget - title_keep);

  PairEncoding enc;
  enc.token_ids.reserve(config.max_length);
  enc.token_ids.push_back(TokenVocabulary::kCls);
  for (std::size_t i = 0; i < title_keep; ++i) enc.token_ids.push_back(vocab.id(title[i]));
  enc.token_ids.push_back(TokenVocabulary::kSep);
  const std::size_t first_segment = enc.token_ids.size();
  for (std::size_t i = 0; i < caption_keep; ++i) {
    enc.token_ids.push_back(vocab.id(caption[i]));
  }
  enc.token_ids.push_back(TokenVocabulary::kSep);
  const std::size_t used = enc.token_ids.size();

  enc.segment_ids.assign(config.max_length, 0);
  std::fill(enc.segment_ids.begin() + static_cast<std::ptrdiff_t>(first_segment),
            enc.segment_ids.begin() + static_cast<std::ptrdiff_t>(used), 1);
  enc.text_mask.assign(config.max_length, MaskValue::kIgnore);
  std::fill_n(enc.text_mask.begin(), used, MaskValue::kAttend);
  enc.token_ids.resize(config.max_length, TokenVocabulary::kPad);
  enc.patches = patchify(image, config.patch);
  return enc;
}

PairEncoding encode_pair(const MultimodalExample& example,
                         const std::filesystem::path& image_root,
                         const TokenVocabulary& vocab,
                         const EncodingConfig& config) {
  return encode_pair(example, load_image(image_root / example.image_path), vocab,
                     config);
}

BlockConfig BranchConfig::block_config() const {
  BlockConfig b;
  b.attention = AttentionConfig{hidden, heads};
  b.mlp = mlp;
  b.dropout = block_dropout;
  b.ln_eps = ln_eps;
  return b;
}

namespace {

AttentionMask effective_text_mask(const PairEncoding& enc, ModalityMask modality) {
  AttentionMask mask = enc.text_mask;
  if (modality == ModalityMask::kImageOnly) {
    std::fill(mask.begin() + 1, mask.end(), MaskValue::kIgnore);
  }
  return mask;
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

std::size_t text_positions_used(const PairEncoding& encoding,
                                const BranchForwardOptions& options) {
  if (!options.compact_padding) return encoding.token_ids.size();
  const AttentionMask mask = effective_text_mask(encoding, options.modality);
  std::size_t n = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] == MaskValue::kAttend) n = i + 1;
  }
  return std::max<std::size_t>(n, 1);
}

AuxLanguageEncoder::AuxLanguageEncoder(ModelParameters& params,
                                       const std::string& name,
                                       const BranchConfig& cfg,
                                       RandomStream& init)
    : config(cfg) {
  token_embed = Embedding(params, name + ".token_embed", cfg.vocab_size, cfg.hidden, init);
  position_embed =
      Embedding(params, name + ".position_embed", cfg.max_length, cfg.hidden, init);
  for (std::size_t i = 0; i < cfg.layers; ++i) {
    blocks.emplace_back(params, name + ".block" + std::to_string(i),
                        cfg.block_config(), init);
  }
  final_norm = LayerNorm(params, name + ".final_norm", cfg.hidden, cfg.ln_eps);
}

Tensor AuxLanguageEncoder::forward(const std::vector<std::size_t>& token_ids,
                                   const AttentionMask& mask, Mode mode,
                                   RandomStream* dropout_stream) const {
  if (token_ids.size() != mask.size()) {
    throw DimensionError("aux encoder: " + std::to_string(token_ids.size()) +
                         " tokens but mask of " + std::to_string(mask.size()));
  }
  Tensor x = ops::add(embedding_lookup(token_embed, token_ids),
                      embedding_lookup(position_embed, iota_indices(token_ids.size())));
  for (const auto& block : blocks) x = block.forward(x, mask, mode, dropout_stream);
  return final_norm.forward(x);
}

MultimodalBranch::MultimodalBranch(ModelParameters& params,
                                   const std::string& name, BranchKind k,
                                   const BranchConfig& cfg, RandomStream& init)
    : kind(k), config(cfg) {
  const std::size_t d = cfg.hidden;
  if (kind == BranchKind::kVilt) {
    token_embed = Embedding(params, name + ".token_embed", cfg.vocab_size, d, init);
  }
  text_position_embed =
      Embedding(params, name + ".text_position_embed", cfg.max_length, d, init);
  segment_embed = Embedding(params, name + ".segment_embed", 2, d, init);
  modality_embed = Embedding(params, name + ".modality_embed", 2, d, init);
  Tensor cls = Tensor::zeros({1, d});
  for (auto& v : cls.mutable_data()) v = init.normal(0.0, kInitStddev);
  image_cls = params.add(name + ".image_cls", cls);
  image_position_embed = Embedding(params, name + ".image_position_embed",
                                   cfg.num_patches + 1, d, init);
  patch_projection =
      Linear(params, name + ".patch_projection", cfg.patch_dim, d, init);
  for (std::size_t i = 0; i < cfg.layers; ++i) {
    blocks.emplace_back(params, name + ".block" + std::to_string(i),
                        cfg.block_config(), init);
  }
  final_norm = LayerNorm(params, name + ".final_norm", d, cfg.ln_eps);
  pooler = Linear(params, name + ".pooler", d, d, init);
}

std::pair<Tensor, AttentionMask> MultimodalBranch::embed(
    const PairEncoding& enc, const Tensor& text_features,
    const BranchForwardOptions& options) const {
  if (enc.token_ids.size() != config.max_length ||
      enc.segment_ids.size() != config.max_length ||
      enc.text_mask.size() != config.max_length) {
    throw DimensionError("encoding has " + std::to_string(enc.token_ids.size()) +
                         " text positions, branch expects " +
                         std::to_string(config.max_length));
  }
  if (enc.patches.rank() != 2 || enc.patches.dim(0) != config.num_patches ||
      enc.patches.dim(1) != config.patch_dim) {
    throw DimensionError("encoding patches " + shape_to_string(enc.patches.shape()) +
                         " do not match branch [" +
                         std::to_string(config.num_patches) + "x" +
                         std::to_string(config.patch_dim) + "]");
  }
  const std::size_t n = text_positions_used(enc, options);
  const std::vector<std::size_t> ids(enc.token_ids.begin(),
                                     enc.token_ids.begin() + static_cast<std::ptrdiff_t>(n));
  const std::vector<std::size_t> segments(
      enc.segment_ids.begin(), enc.segment_ids.begin() + static_cast<std::ptrdiff_t>(n));

  Tensor text;
  if (text_features.defined()) {
    if (text_features.rank() != 2 || text_features.dim(0) != n ||
        text_features.dim(1) != config.hidden) {
      throw DimensionError("text features " + shape_to_string(text_features.shape()) +
                           " do not cover " + std::to_string(n) + " positions");
    }
    text = text_features;
  } else {
    if (!token_embed.table.defined()) {
      throw ContractError("VAuLT branch needs language-encoder features");
    }
    text = embedding_lookup(token_embed, ids);
  }
  text = ops::add(text, embedding_lookup(text_position_embed, iota_indices(n)));
  text = ops::add(text, embedding_lookup(segment_embed, segments));
  text = ops::add(text, embedding_lookup(modality_embed,
                                         std::vector<std::size_t>(n, 0)));

  const std::size_t image_len = config.num_patches + 1;
  Tensor image = ops::concat(
      {image_cls, patch_projection.forward(enc.patches)}, 0);
  image = ops::add(image, embedding_lookup(image_position_embed,
                                           iota_indices(image_len)));
  image = ops::add(image, embedding_lookup(modality_embed,
                                           std::vector<std::size_t>(image_len, 1)));

  AttentionMask mask = effective_text_mask(enc, options.modality);
  mask.resize(n);
  mask.insert(mask.end(), image_len,
              options.modality == ModalityMask::kTextOnly ? MaskValue::kIgnore
                                                          : MaskValue::kAttend);
  return {ops::concat({text, image}, 0), std::move(mask)};
}

Tensor MultimodalBranch::forward(const PairEncoding& encoding,
                                 const Tensor& text_features,
                                 const BranchForwardOptions& options,
                                 AttentionProbe* probe) const {
  auto [x, mask] = embed(encoding, text_features, options);
  for (const auto& block : blocks) {
    x = block.forward(x, mask, options.mode, options.dropout_stream, probe);
  }
  const Tensor cls = final_norm.forward(ops::slice(x, 0, 0, 1));
  return ops::reshape(ops::tanh(pooler.forward(cls)), {config.hidden});
}

Tensor vilt_branch_forward(const PairEncoding& encoding,
                           const MultimodalBranch& branch,
                           const BranchForwardOptions& options) {
  return branch.forward(encoding, Tensor(), options);
}

Tensor vault_branch_forward(const PairEncoding& encoding,
                            const AuxLanguageEncoder& aux,
                            const MultimodalBranch& branch,
                            const BranchForwardOptions& options) {
  const std::size_t n = text_positions_used(encoding, options);
  const std::vector<std::size_t> ids(
      encoding.token_ids.begin(), encoding.token_ids.begin() + static_cast<std::ptrdiff_t>(n));
  AttentionMask mask = effective_text_mask(encoding, options.modality);
  mask.resize(n);
  const Tensor features =
      aux.forward(ids, mask, options.mode, options.dropout_stream);
  return branch.forward(encoding, features, options);
}

}  // namespace mmtf
