#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mmtf/config.hpp"
#include "mmtf/encoders.hpp"
#include "mmtf/fusion_head.hpp"
#include "mmtf/parameters.hpp"
#include "mmtf/random.hpp"
#include "mmtf/vocabulary.hpp"

namespace mmtf {

// One example encoded for both branches (each has its own vocabulary).
struct EncodedExample {
  std::string id;
  PairEncoding vilt;
  PairEncoding vault;
  std::size_t label = 0;
};

// Dual-branch classifier: ViLT-style and VAuLT-style branches, early (or
// late) fusion of their pooled vectors and a multi-sample dropout head.
// Branch, fusion and head choices come from TrainConfig, so the same class
// builds every ablation variant.
class MmtfModel {
 public:
  MmtfModel(const TrainConfig& config, TokenVocabulary vilt_vocab,
            TokenVocabulary vault_vocab);

  const TrainConfig& config() const { return config_; }
  const TokenVocabulary& vilt_vocab() const { return vilt_vocab_; }
  const TokenVocabulary& vault_vocab() const { return vault_vocab_; }
  ModelParameters& parameters() { return params_; }
  const ModelParameters& parameters() const { return params_; }

  bool uses_vilt() const { return config_.branches != Branches::kVaultOnly; }
  bool uses_vault() const { return config_.branches != Branches::kViltOnly; }
  std::size_t fused_width() const;

  EncodedExample encode(const MultimodalExample& example, const Tensor& image) const;

  // Pooled vectors per active branch, each [B x d] (ViLT first).
  std::vector<Tensor> pooled(const std::vector<const EncodedExample*>& batch,
                             Mode mode);
  // Classifier input for a batch: IFV for early fusion, stack outputs for late.
  FusedFeature fused(const std::vector<Tensor>& pools) const;
  // Logit sets [B x K]: one per MSD sample in train mode, one in eval mode.
  std::vector<Tensor> forward(const std::vector<const EncodedExample*>& batch,
                              Mode mode);
  Tensor loss(const std::vector<const EncodedExample*>& batch, Mode mode);
  // Eval-mode logits for one example, [K].
  std::vector<double> logits(const EncodedExample& example);
  std::size_t predict_one(const EncodedExample& example);

  const MultimodalBranch* vilt_branch() const { return vilt_ ? &*vilt_ : nullptr; }
  const MultimodalBranch* vault_branch() const { return vault_ ? &*vault_ : nullptr; }
  const AuxLanguageEncoder* aux_encoder() const { return aux_ ? &*aux_ : nullptr; }
  const LateFusionHead* late_head() const { return late_ ? &*late_ : nullptr; }
  const MsdHead& head() const { return head_; }

  RandomStream& dropout_stream() { return dropout_stream_; }
  std::map<std::string, std::string> rng_states() const;
  void restore_rng_states(const std::map<std::string, std::string>& states);

 private:
  TrainConfig config_;
  TokenVocabulary vilt_vocab_;
  TokenVocabulary vault_vocab_;
  ModelParameters params_;
  std::optional<MultimodalBranch> vilt_;
  std::optional<MultimodalBranch> vault_;
  std::optional<AuxLanguageEncoder> aux_;
  std::optional<LateFusionHead> late_;
  MsdHead head_;
  RandomStream dropout_stream_;
};

}  // namespace mmtf
