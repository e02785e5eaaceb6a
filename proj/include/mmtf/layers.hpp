#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mmtf/parameters.hpp"
#include "mmtf/random.hpp"
#include "mmtf/tensor.hpp"

namespace mmtf {

enum class Mode { kTrain, kEval };

enum class MaskValue : std::uint8_t { kIgnore = 0, kAttend = 1 };
using AttentionMask = std::vector<MaskValue>;

// Additive logit applied to ignored key positions.
inline constexpr double kMaskedLogit = -1e9;

inline constexpr double kInitStddev = 0.02;

class Linear {
 public:
  Linear() = default;
  // weight ~ N(0, 0.02) of shape [in x out], bias zeros (or no bias).
  Linear(ModelParameters& params, const std::string& name, std::size_t in,
         std::size_t out, RandomStream& init, bool with_bias = true);

  // [rows x in] -> [rows x out]; a [in] vector maps to [out].
  Tensor forward(const Tensor& x) const;

  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }

  Tensor weight;
  Tensor bias;
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(ModelParameters& params, const std::string& name, std::size_t rows,
            std::size_t width, RandomStream& init);

  std::size_t rows() const { return table.dim(0); }
  std::size_t width() const { return table.dim(1); }

  Tensor table;
};

// Gathers table rows; backward scatters additively into the table.
// Throws LabelError on an index past the last row.
Tensor embedding_lookup(const Embedding& embedding,
                        const std::vector<std::size_t>& indices);

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ModelParameters& params, const std::string& name, std::size_t width,
            double eps);
  Tensor forward(const Tensor& x) const;

  Tensor gain;
  Tensor bias;
  double eps = 1e-5;
};

struct AttentionConfig {
  std::size_t hidden = 64;
  std::size_t heads = 4;

  std::size_t head_dim() const { return hidden / heads; }
  // Throws ContractError unless heads > 0 and hidden % heads == 0.
  void validate() const;
};

struct DropoutSpec {
  double rate = 0.0;
  Mode mode = Mode::kEval;
  RandomStream* stream = nullptr;  // required in train mode when rate > 0
};

// Inverted dropout: in train mode each element is zeroed with probability
// `rate` and survivors are scaled by 1 / (1 - rate). Identity in eval mode.
Tensor dropout(const Tensor& x, const DropoutSpec& spec);

// Per-head attention weights captured during a forward pass.
struct AttentionProbe {
  std::vector<Tensor> weights;  // one [seq x seq] per head
};

class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ModelParameters& params, const std::string& name,
                     const AttentionConfig& config, RandomStream& init);

  // Scaled dot-product attention over [seq x hidden]; ignored positions are
  // excluded as keys. Throws ContractError when every position is ignored.
  Tensor forward(const Tensor& x, const AttentionMask& mask,
                 AttentionProbe* probe = nullptr) const;

  AttentionConfig config;
  Linear query;
  Linear key;  // no bias: softmax ignores a per-row logit shift
  Linear value;
  Linear output;
};

struct BlockConfig {
  AttentionConfig attention;
  std::size_t mlp = 128;
  double dropout = 0.0;  // residual-branch dropout inside the block
  double ln_eps = 1e-5;
};

// Pre-layer-norm transformer block:
//   h = x + Drop(MHA(LN1(x)));  y = h + Drop(FFN(LN2(h)))
// with FFN(z) = W2 gelu(W1 z + b1) + b2.
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(ModelParameters& params, const std::string& name,
                   const BlockConfig& config, RandomStream& init);

  Tensor forward(const Tensor& x, const AttentionMask& mask, Mode mode,
                 RandomStream* dropout_stream = nullptr,
                 AttentionProbe* probe = nullptr) const;

  BlockConfig config;
  LayerNorm attention_norm;
  MultiHeadAttention attention;
  LayerNorm mlp_norm;
  Linear mlp_in;
  Linear mlp_out;
};

}  // namespace mmtf
