#include "mmtf/model.hpp"

#include "mmtf/errors.hpp"
#include "mmtf/ops.hpp"

namespace mmtf {

namespace {

BranchConfig branch_config(const TrainConfig& c, std::size_t vocab_size,
                           std::size_t layers) {
  const EncodingConfig enc = c.encoding();
  BranchConfig b;
  b.hidden = c.model.hidden;
  b.heads = c.model.heads;
  b.mlp = c.model.mlp;
  b.layers = layers;
  b.block_dropout = c.model.block_dropout;
  b.ln_eps = c.model.ln_eps;
  b.vocab_size = vocab_size;
  b.max_length = c.max_length;
  b.num_patches = enc.num_patches();
  b.patch_dim = enc.patch_dim();
  return b;
}

}  // namespace

MmtfModel::MmtfModel(const TrainConfig& config, TokenVocabulary vilt_vocab,
                     TokenVocabulary vault_vocab)
    : config_(config),
      vilt_vocab_(std::move(vilt_vocab)),
      vault_vocab_(std::move(vault_vocab)),
      dropout_stream_(config.seed, "dropout") {
  config_.validate();
  config_.encoding().validate();
  RandomStream init(config_.seed, "init");
  const std::size_t layers = config_.model.layers;
  if (uses_vilt()) {
    vilt_.emplace(params_, "vilt", BranchKind::kVilt,
                  branch_config(config_, vilt_vocab_.size(), layers), init);
  }
  if (uses_vault()) {
    aux_.emplace(params_, "vault_text",
                 branch_config(config_, vault_vocab_.size(), config_.model.aux_layers),
                 init);
    vault_.emplace(params_, "vault", BranchKind::kVault,
                   branch_config(config_, vault_vocab_.size(), layers), init);
  }
  std::vector<double> rates;
  if (config_.msd) rates = config_.msd_rates;
  if (config_.fusion == Fusion::kLate) {
    std::vector<std::size_t> widths;
    if (uses_vilt()) widths.push_back(config_.model.hidden);
    if (uses_vault()) widths.push_back(config_.model.hidden);
    late_.emplace(params_, "late", widths, config_.model.late_width,
                  config_.classes(), init);
    head_ = MsdHead(late_->output_layer, config_.d0_dropout, rates);
  } else {
    head_ = MsdHead(params_, "head", fused_width(), config_.classes(),
                    config_.d0_dropout, rates, init);
  }
  params_.seal();
}

std::size_t MmtfModel::fused_width() const {
  if (late_) return late_->feature_width();
  return config_.model.hidden * ((uses_vilt() ? 1 : 0) + (uses_vault() ? 1 : 0));
}

EncodedExample MmtfModel::encode(const MultimodalExample& example,
                                 const Tensor& image) const {
  EncodedExample out;
  out.id = example.id;
  const auto label = example.label(config_.task);
  if (!label) {
    throw LabelError("example '" + example.id + "' has no " +
                     std::string(task_name(config_.task)) + " label");
  }
  out.label = *label;
  const EncodingConfig enc = config_.encoding();
  if (uses_vilt()) out.vilt = encode_pair(example, image, vilt_vocab_, enc);
  if (uses_vault()) out.vault = encode_pair(example, image, vault_vocab_, enc);
  return out;
}

std::vector<Tensor> MmtfModel::pooled(
    const std::vector<const EncodedExample*>& batch, Mode mode) {
  if (batch.empty()) throw ContractError("empty batch");
  BranchForwardOptions options;
  options.mode = mode;
  options.dropout_stream = &dropout_stream_;
  options.modality = config_.modality;
  const std::size_t d = config_.model.hidden;

  std::vector<Tensor> pools;
  auto stack = [&](auto&& one) {
    std::vector<Tensor> rows;
    rows.reserve(batch.size());
    for (const EncodedExample* ex : batch) {
      rows.push_back(ops::reshape(one(*ex), {1, d}));
    }
    pools.push_back(rows.size() == 1 ? rows[0] : ops::concat(rows, 0));
  };
  if (vilt_) {
    stack([&](const EncodedExample& ex) {
      return vilt_branch_forward(ex.vilt, *vilt_, options);
    });
  }
  if (vault_) {
    stack([&](const EncodedExample& ex) {
      return vault_branch_forward(ex.vault, *aux_, *vault_, options);
    });
  }
  return pools;
}

FusedFeature MmtfModel::fused(const std::vector<Tensor>& pools) const {
  if (late_) return FusedFeature{late_->features(pools)};
  return early_fuse(pools);
}

std::vector<Tensor> MmtfModel::forward(
    const std::vector<const EncodedExample*>& batch, Mode mode) {
  return msd_forward(fused(pooled(batch, mode)), head_, mode, &dropout_stream_);
}

Tensor MmtfModel::loss(const std::vector<const EncodedExample*>& batch, Mode mode) {
  std::vector<std::size_t> targets;
  targets.reserve(batch.size());
  for (const EncodedExample* ex : batch) targets.push_back(ex->label);
  return msd_loss(forward(batch, mode), targets);
}

std::vector<double> MmtfModel::logits(const EncodedExample& example) {
  NoGradGuard no_grad;
  const Tensor out = forward({&example}, Mode::kEval).front();
  return std::vector<double>(out.data().begin(), out.data().end());
}

std::size_t MmtfModel::predict_one(const EncodedExample& example) {
  return predict(std::span<const double>(logits(example)));
}

std::map<std::string, std::string> MmtfModel::rng_states() const {
  return {{dropout_stream_.name(), dropout_stream_.state()}};
}

void MmtfModel::restore_rng_states(const std::map<std::string, std::string>& states) {
  const auto it = states.find(dropout_stream_.name());
  if (it != states.end()) dropout_stream_.restore(it->second);
}

}  // namespace mmtf
