#include "mmtf/diagnostics.hpp"

#include "mmtf/model.hpp"
#include "mmtf/synthetic.hpp"

namespace mmtf {

GradCheckReport end_to_end_grad_check(const TrainConfig& base, std::uint64_t seed,
                                      const GradCheckOptions& options,
                                      CheckDropout dropout) {
  TrainConfig config = base;
  config.seed = seed;
  if (dropout == CheckDropout::kDisabled) {
    config.d0_dropout = 0.0;
    config.model.block_dropout = 0.0;
    for (double& r : config.msd_rates) r = 0.0;
  }
  SyntheticSpec spec;
  spec.task = config.task;
  spec.n_train = 2;
  spec.n_val = spec.n_test = 1;
  spec.seed = seed;
  spec.image_size = config.model.image_height;
  const auto items = synthesize_split(spec, "train");

  std::vector<MultimodalExample> examples;
  for (const auto& item : items) examples.push_back(item.example);
  MmtfModel model(config, build_vocab(examples), build_vocab(examples));
  std::vector<EncodedExample> encoded;
  for (const auto& item : items) {
    encoded.push_back(model.encode(item.example, image_tensor(item.image)));
  }
  const std::vector<const EncodedExample*> batch = {&encoded[0], &encoded[1]};

  GradCheckOptions opts = options;
  opts.seed = seed;
  return grad_check(
      [&] {
        model.dropout_stream().reset();
        return model.loss(batch, Mode::kTrain);
      },
      model.parameters().entries(), opts);
}

}  // namespace mmtf
