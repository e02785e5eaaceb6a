#include "mmtf/layers.hpp"

#include <cmath>

#include "mmtf/errors.hpp"
#include "mmtf/ops.hpp"

namespace mmtf {

namespace {

Tensor normal_tensor(Shape shape, double stddev, RandomStream& init) {
  auto t = Tensor::zeros(std::move(shape));
  for (auto& v : t.mutable_data()) v = init.normal(0.0, stddev);
  return t;
}

}  // namespace

Linear::Linear(ModelParameters& params, const std::string& name,
               std::size_t in, std::size_t out, RandomStream& init, bool with_bias)
    : weight(params.add(name + ".weight",
                        normal_tensor({in, out}, kInitStddev, init))) {
  if (with_bias) bias = params.add(name + ".bias", Tensor::zeros({out}));
}

Tensor Linear::forward(const Tensor& x) const {
  if (x.rank() == 1) {
    return ops::reshape(forward(ops::reshape(x, {1, x.numel()})), {out_features()});
  }
  const Tensor y = ops::matmul(x, weight);
  return bias.defined() ? ops::add_row(y, bias) : y;
}

Embedding::Embedding(ModelParameters& params, const std::string& name,
                     std::size_t rows, std::size_t width, RandomStream& init)
    : table(params.add(name, normal_tensor({rows, width}, kInitStddev, init))) {}

Tensor embedding_lookup(const Embedding& embedding,
                        const std::vector<std::size_t>& indices) {
  return ops::gather_rows(embedding.table, indices);
}

LayerNorm::LayerNorm(ModelParameters& params, const std::string& name,
                     std::size_t width, double eps)
    : gain(params.add(name + ".gain", Tensor::full({width}, 1.0))),
      bias(params.add(name + ".bias", Tensor::zeros({width}))),
      eps(eps) {}

Tensor LayerNorm::forward(const Tensor& x) const {
  return ops::layer_norm(x, gain, bias, eps);
}

void AttentionConfig::validate() const {
  if (heads == 0 || hidden == 0 || hidden % heads != 0) {
    throw ContractError("attention hidden width " + std::to_string(hidden) +
                        " is not divisible by " + std::to_string(heads) +
                        " heads");
  }
}

Tensor dropout(const Tensor& x, const DropoutSpec& spec) {
  if (!(spec.rate >= 0.0) || spec.rate >= 1.0) {
    throw ContractError("dropout rate must lie in [0, 1), got " +
                        std::to_string(spec.rate));
  }
  if (spec.mode == Mode::kEval || spec.rate == 0.0) return x;
  if (spec.stream == nullptr) {
    throw ContractError("train-mode dropout needs a random stream");
  }
  const double keep_scale = 1.0 / (1.0 - spec.rate);
  std::vector<double> mask(x.numel());
  for (auto& m : mask) m = spec.stream->uniform() < spec.rate ? 0.0 : keep_scale;
  return ops::mul(x, Tensor::from(x.shape(), std::move(mask)));
}

MultiHeadAttention::MultiHeadAttention(ModelParameters& params,
                                       const std::string& name,
                                       const AttentionConfig& cfg,
                                       RandomStream& init)
    : config(cfg) {
  config.validate();
  query = Linear(params, name + ".query", cfg.hidden, cfg.hidden, init);
  key = Linear(params, name + ".key", cfg.hidden, cfg.hidden, init, false);
  value = Linear(params, name + ".value", cfg.hidden, cfg.hidden, init);
  output = Linear(params, name + ".output", cfg.hidden, cfg.hidden, init);
}

Tensor MultiHeadAttention::forward(const Tensor& x, const AttentionMask& mask,
                                   AttentionProbe* probe) const {
  if (x.rank() != 2 || x.dim(1) != config.hidden) {
    throw DimensionError("attention expects [seq x " +
                         std::to_string(config.hidden) + "], got " +
                         shape_to_string(x.shape()));
  }
  const std::size_t seq = x.dim(0);
  if (mask.size() != seq) {
    throw DimensionError("attention mask has " + std::to_string(mask.size()) +
                         " entries for sequence of " + std::to_string(seq));
  }
  std::vector<double> mask_row(seq);
  bool any_attend = false;
  for (std::size_t i = 0; i < seq; ++i) {
    any_attend = any_attend || mask[i] == MaskValue::kAttend;
    mask_row[i] = mask[i] == MaskValue::kAttend ? 0.0 : kMaskedLogit;
  }
  if (!any_attend) throw ContractError("attention over a fully masked sequence");
  const Tensor mask_bias = Tensor::from({seq}, std::move(mask_row));

  const Tensor q = query.forward(x);
  const Tensor k = key.forward(x);
  const Tensor v = value.forward(x);
  const std::size_t hd = config.head_dim();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

  std::vector<Tensor> heads;
  heads.reserve(config.heads);
  for (std::size_t h = 0; h < config.heads; ++h) {
    const Tensor qh = ops::slice(q, 1, h * hd, hd);
    const Tensor kh = ops::slice(k, 1, h * hd, hd);
    const Tensor vh = ops::slice(v, 1, h * hd, hd);
    Tensor scores = ops::scale(ops::matmul(qh, ops::transpose(kh)), inv_sqrt);
    scores = ops::add_row(scores, mask_bias);
    const Tensor weights = ops::softmax(scores, 1);
    if (probe) probe->weights.push_back(weights);
    heads.push_back(ops::matmul(weights, vh));
  }
  const Tensor context = config.heads == 1 ? heads.front() : ops::concat(heads, 1);
  return output.forward(context);
}

TransformerBlock::TransformerBlock(ModelParameters& params,
                                   const std::string& name,
                                   const BlockConfig& cfg, RandomStream& init)
    : config(cfg) {
  const std::size_t d = cfg.attention.hidden;
  attention_norm = LayerNorm(params, name + ".attention_norm", d, cfg.ln_eps);
  attention = MultiHeadAttention(params, name + ".attention", cfg.attention, init);
  mlp_norm = LayerNorm(params, name + ".mlp_norm", d, cfg.ln_eps);
  mlp_in = Linear(params, name + ".mlp_in", d, cfg.mlp, init);
  mlp_out = Linear(params, name + ".mlp_out", cfg.mlp, d, init);
}

Tensor TransformerBlock::forward(const Tensor& x, const AttentionMask& mask,
                                 Mode mode, RandomStream* dropout_stream,
                                 AttentionProbe* probe) const {
  const DropoutSpec drop{config.dropout, mode, dropout_stream};
  Tensor attended = attention.forward(attention_norm.forward(x), mask, probe);
  const Tensor h = ops::add(x, dropout(attended, drop));
  Tensor mlp = mlp_out.forward(ops::gelu(mlp_in.forward(mlp_norm.forward(h))));
  return ops::add(h, dropout(mlp, drop));
}

}  // namespace mmtf
