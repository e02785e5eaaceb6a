#include "mmtf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "mmtf/errors.hpp"
#include "mmtf/ops.hpp"
#include "mmtf/optimizer.hpp"

namespace mmtf {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<const EncodedExample*> batch_of(const std::vector<EncodedExample>& all,
                                            const std::vector<std::size_t>& order,
                                            std::size_t begin, std::size_t end) {
  std::vector<const EncodedExample*> out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) out.push_back(&all[order[i]]);
  return out;
}

}  // namespace

const std::vector<MultimodalExample>& DatasetSplits::split(std::string_view name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw ConfigError("unknown split '" + std::string(name) + "'");
}

DatasetSplits load_splits(const std::filesystem::path& dir, Task task) {
  DatasetSplits d;
  d.root = dir;
  d.train = load_dataset(split_file(dir, "train"), task);
  d.val = load_dataset(split_file(dir, "val"), task);
  d.test = load_dataset(split_file(dir, "test"), task);
  return d;
}

std::string EpochLog::to_json() const {
  return "{\"epoch\":" + std::to_string(epoch) + ",\"steps\":" + std::to_string(steps) +
         ",\"train_loss\":" + fmt(train_loss) + ",\"val_loss\":" + fmt(val_loss) +
         ",\"val_macro_f1\":" + fmt(val_macro_f1) +
         ",\"best\":" + (best ? "true" : "false") + "}";
}

std::vector<EncodedExample> encode_examples(const MmtfModel& model,
                                            const std::vector<MultimodalExample>& examples,
                                            const std::filesystem::path& image_root) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    out.push_back(model.encode(ex, load_image(image_root / ex.image_path)));
  }
  return out;
}

EvalOutcome evaluate_encoded(MmtfModel& model,
                             const std::vector<EncodedExample>& examples) {
  if (examples.empty()) throw ContractError("evaluate: empty split");
  NoGradGuard no_grad;
  const std::size_t k = model.config().classes();
  const std::size_t step = model.config().eval_batch;
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);

  EvalOutcome out;
  double loss_sum = 0.0;
  for (std::size_t begin = 0; begin < examples.size(); begin += step) {
    const std::size_t end = std::min(begin + step, examples.size());
    const auto batch = batch_of(examples, order, begin, end);
    const Tensor logits = model.forward(batch, Mode::kEval).front();
    const auto values = logits.data();
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto row = values.subspan(b * k, k);
      const std::size_t gold = batch[b]->label;
      if (gold >= k) {
        throw LabelError("example '" + batch[b]->id + "' label " + std::to_string(gold) +
                         " outside the " + std::to_string(k) + "-class vocabulary");
      }
      // Per-example cross-entropy so the sum is independent of batching.
      loss_sum += ops::cross_entropy(Tensor::from({k}, {row.begin(), row.end()}), {gold})
                      .item();
      out.predictions.push_back(predict(row));
      out.golds.push_back(gold);
    }
  }
  out.loss = loss_sum / static_cast<double>(examples.size());
  out.metrics = macro_metrics(out.predictions, out.golds, k);
  return out;
}

MetricsReport evaluate(MmtfModel& model, const std::vector<MultimodalExample>& examples,
                       const std::filesystem::path& image_root) {
  return evaluate_encoded(model, encode_examples(model, examples, image_root)).metrics;
}

MetricsReport evaluate(const Checkpoint& checkpoint,
                       const std::vector<MultimodalExample>& examples,
                       const std::filesystem::path& image_root) {
  auto model = restore_model(checkpoint);
  return evaluate(*model, examples, image_root);
}

TrainResult train(const TrainConfig& config, const DatasetSplits& data,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (data.train.empty()) throw ContractError("train: empty training split");
  if (data.val.empty()) throw ContractError("train: empty validation split");

  // Two independently built vocabularies, one per branch.
  MmtfModel model(config, build_vocab(data.train), build_vocab(data.train));
  const auto train_set = encode_examples(model, data.train, data.root);
  const auto val_set = encode_examples(model, data.val, data.root);

  Adam adam(model.parameters(), {.learning_rate = config.learning_rate});
  model.parameters().zero_grad();
  RandomStream shuffle(config.seed, "shuffle");

  TrainResult result;
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle.below(i)]);
    }
    EpochLog log;
    log.epoch = epoch;
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.train_batch) {
      const std::size_t end = std::min(begin + config.train_batch, order.size());
      const Tensor loss = model.loss(batch_of(train_set, order, begin, end), Mode::kTrain);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
      }
      loss_sum += value * static_cast<double>(end - begin);
      backward(loss);
      adam.step(model.parameters());
      ++log.steps;
    }
    log.train_loss = loss_sum / static_cast<double>(order.size());

    const EvalOutcome val = evaluate_encoded(model, val_set);
    log.val_loss = val.loss;
    log.val_macro_f1 = val.metrics.macro_f1;
    if (val.loss < best_loss) {
      best_loss = val.loss;
      log.best = true;
      result.best = capture(model, epoch, val.loss);
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  result.model = restore_model(result.best);
  return result;
}

std::string metrics_to_json(const MetricsReport& r) {
  auto list = [](const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
    return s + "]";
  };
  std::string confusion = "[";
  for (std::size_t g = 0; g < r.confusion.size(); ++g) {
    confusion += g ? ",[" : "[";
    for (std::size_t p = 0; p < r.confusion[g].size(); ++p) {
      confusion += (p ? "," : "") + std::to_string(r.confusion[g][p]);
    }
    confusion += "]";
  }
  confusion += "]";
  return "{\"classes\":" + std::to_string(r.classes) +
         ",\"count\":" + std::to_string(r.count) +
         ",\"macro_precision\":" + fmt(r.macro_precision) +
         ",\"macro_recall\":" + fmt(r.macro_recall) +
         ",\"macro_f1\":" + fmt(r.macro_f1) + ",\"accuracy\":" + fmt(r.accuracy) +
         ",\"precision\":" + list(r.precision) + ",\"recall\":" + list(r.recall) +
         ",\"f1\":" + list(r.f1) + ",\"confusion\":" + confusion + "}";
}

}  // namespace mmtf
