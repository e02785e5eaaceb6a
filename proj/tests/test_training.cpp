#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "mmtf/checkpoint.hpp"
#include "mmtf/config.hpp"
#include "mmtf/diagnostics.hpp"
#include "mmtf/errors.hpp"
#include "mmtf/experiments.hpp"
#include "mmtf/metrics.hpp"
#include "mmtf/ops.hpp"
#include "mmtf/optimizer.hpp"
#include "mmtf/synthetic.hpp"
#include "mmtf/trainer.hpp"
#include "test_util.hpp"

using namespace mmtf;
namespace fs = std::filesystem;

namespace {

struct Oracle {
  std::vector<double> p, r, f1;
  double macro_p = 0, macro_r = 0, macro_f1 = 0, accuracy = 0;
};

// Counts TP/FP/FN by scanning the pairs once per class.
Oracle brute_force(const std::vector<std::size_t>& pred,
                   const std::vector<std::size_t>& gold, std::size_t k) {
  Oracle o;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += pred[i] == gold[i];
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (pred[i] == c && gold[i] == c) ++tp;
      if (pred[i] == c && gold[i] != c) ++fp;
      if (pred[i] != c && gold[i] == c) ++fn;
    }
    const double p = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    const double r = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    const double f = p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
    o.p.push_back(p);
    o.r.push_back(r);
    o.f1.push_back(f);
    o.macro_p += p;
    o.macro_r += r;
    o.macro_f1 += f;
  }
  o.macro_p /= double(k);
  o.macro_r /= double(k);
  o.macro_f1 /= double(k);
  o.accuracy = double(hits) / double(gold.size());
  return o;
}

TrainConfig tiny_config() {
  TrainConfig c = desk_preset(Task::kSentiment);
  c.model.hidden = 16;
  c.model.heads = 2;
  c.model.mlp = 32;
  c.model.layers = 1;
  c.model.aux_layers = 1;
  c.model.late_width = 16;
  c.max_length = 12;
  c.epochs = 2;
  c.learning_rate = 1e-3;
  return c;
}

const DatasetSplits& tiny_data() {
  static const DatasetSplits data = [] {
    SyntheticSpec spec;
    spec.n_train = 24;
    spec.n_val = 9;
    spec.n_test = 9;
    spec.seed = 3;
    const auto dir = testutil::temp_dir("tiny_data");
    generate_synthetic(spec, dir);
    return load_splits(dir, Task::kSentiment);
  }();
  return data;
}

std::vector<std::string> log_lines(const std::vector<EpochLog>& log) {
  std::vector<std::string> out;
  for (const auto& e : log) out.push_back(e.to_json());
  return out;
}

}  // namespace

TEST(Metrics, HandCase) {
  const auto m = macro_metrics({0, 1, 0, 1}, {0, 0, 1, 1}, 2);
  EXPECT_EQ(m.macro_f1, 0.5);
  EXPECT_EQ(m.macro_precision, 0.5);
  EXPECT_EQ(m.macro_recall, 0.5);
  EXPECT_EQ(m.accuracy, 0.5);
  EXPECT_EQ(m.f1, (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(m.confusion, (std::vector<std::vector<std::size_t>>{{1, 1}, {1, 1}}));
  const auto perfect = macro_metrics({2, 0, 1}, {2, 0, 1}, 3);
  EXPECT_EQ(perfect.macro_f1, 1.0);
  EXPECT_EQ(perfect.accuracy, 1.0);
}

TEST(Metrics, AbsentClassCountsAsZero) {
  const auto m = macro_metrics({0, 1}, {0, 1}, 3);
  EXPECT_EQ(m.f1[2], 0.0);
  EXPECT_EQ(m.precision[2], 0.0);
  EXPECT_DOUBLE_EQ(m.macro_f1, 2.0 / 3.0);
  EXPECT_THROW(macro_metrics({0, 3}, {0, 1}, 3), LabelError);
  EXPECT_THROW(macro_metrics({0}, {0, 1}, 3), ContractError);
  EXPECT_EQ(percent(0.88444), "88.44");
}

TEST(Metrics, MatchesBruteForceOracle) {
  RandomStream rng(5, "metrics");
  for (std::size_t k : {2u, 3u, 6u, 7u}) {
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t n = 1 + rng.below(40);
      std::vector<std::size_t> pred(n), gold(n);
      for (std::size_t i = 0; i < n; ++i) {
        gold[i] = rng.below(k);
        pred[i] = rng.below(3) == 0 ? gold[i] : rng.below(k);
      }
      const auto got = macro_metrics(pred, gold, k);
      const auto want = brute_force(pred, gold, k);
      ASSERT_EQ(got.precision, want.p);
      ASSERT_EQ(got.recall, want.r);
      ASSERT_EQ(got.f1, want.f1);
      ASSERT_EQ(got.macro_precision, want.macro_p);
      ASSERT_EQ(got.macro_recall, want.macro_r);
      ASSERT_EQ(got.macro_f1, want.macro_f1);
      ASSERT_EQ(got.accuracy, want.accuracy);
      // Single-label: micro precision == micro recall == accuracy.
      std::size_t diag = 0, total = 0;
      for (std::size_t c = 0; c < k; ++c) {
        diag += got.confusion[c][c];
        for (std::size_t j = 0; j < k; ++j) total += got.confusion[c][j];
      }
      ASSERT_EQ(total, n);
      ASSERT_EQ(double(diag) / double(total), got.accuracy);
    }
  }
}

TEST(Adam, FirstStepMatchesClosedForm) {
  ModelParameters params;
  Tensor w = params.add("w", Tensor::from({3}, {1.0, -2.0, 0.5}, true));
  params.seal();
  Adam adam(params, AdamOptions{0.1, 0.9, 0.999, 1e-8});
  backward(ops::sum(ops::mul(w, Tensor::from({3}, {2.0, -0.5, 0.0}))));
  adam.step(params);
  // m_hat = g, v_hat = g^2: update = lr * g / (|g| + eps).
  EXPECT_DOUBLE_EQ(w.at(0), 1.0 - 0.1 * 2.0 / (2.0 + 1e-8));
  EXPECT_DOUBLE_EQ(w.at(1), -2.0 + 0.1 * 0.5 / (0.5 + 1e-8));
  EXPECT_EQ(w.at(2), 0.5);
  EXPECT_EQ(adam.steps(), 1u);
  for (double g : w.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Adam, RejectsNonFiniteGradientsWithoutUpdating) {
  ModelParameters params;
  Tensor w = params.add("layer.weight", Tensor::from({2}, {1.0, 2.0}, true));
  Adam adam(params, AdamOptions{});
  backward(ops::sum(ops::mul(w, Tensor::from({2}, {std::numeric_limits<double>::infinity(), 1.0}))));
  try {
    adam.step(params);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer.weight"), std::string::npos);
  }
  EXPECT_EQ(testutil::values(w), (std::vector<double>{1.0, 2.0}));
}

TEST(Adam, OneStepLowersLossOnFrozenBatch) {
  TrainConfig cfg = tiny_config();
  const auto& data = tiny_data();
  MmtfModel model(cfg, build_vocab(data.train), build_vocab(data.train));
  const auto encoded = encode_examples(model, data.train, data.root);
  std::vector<const EncodedExample*> batch;
  for (std::size_t i = 0; i < 8; ++i) batch.push_back(&encoded[i]);
  double before = 0.0;
  {
    NoGradGuard no_grad;
    before = model.loss(batch, Mode::kEval).item();
  }
  backward(model.loss(batch, Mode::kEval));
  Adam adam(model.parameters(), AdamOptions{1e-3});
  adam.step(model.parameters());
  NoGradGuard no_grad;
  EXPECT_LT(model.loss(batch, Mode::kEval).item(), before);
}

TEST(Config, TextRoundTripAndErrors) {
  TrainConfig c = tiny_config();
  c.fusion = Fusion::kLate;
  c.msd = false;
  c.msd_rates = {0.15, 0.25};
  c.modality = ModalityMask::kImageOnly;
  c.learning_rate = 2.99e-3;
  const TrainConfig back = TrainConfig::from_text(c.to_text());
  EXPECT_EQ(back.to_text(), c.to_text());
  EXPECT_EQ(back.learning_rate, 2.99e-3);
  EXPECT_EQ(back.msd_rates, c.msd_rates);

  TrainConfig d;
  EXPECT_THROW(d.set("train.speed", "3"), ConfigError);
  EXPECT_THROW(d.set("train.batch", "four"), ConfigError);
  EXPECT_THROW(d.set("model.fusion", "middle"), ConfigError);
  d.model.heads = 5;
  EXPECT_THROW(d.validate(), ConfigError);
  const auto text = TrainConfig::from_text("# comment\n\ntrain.epochs = 3\n", tiny_config());
  EXPECT_EQ(text.epochs, 3u);
  EXPECT_EQ(text.model.hidden, 16u);
  EXPECT_THROW(TrainConfig::from_text("train.epochs 3\n"), ConfigError);
}

TEST(Config, Presets) {
  EXPECT_EQ(desk_preset(Task::kSentiment).train_batch, 4u);
  EXPECT_EQ(desk_preset(Task::kDesire).d0_dropout, 0.7);
  EXPECT_EQ(desk_preset(Task::kEmotion).learning_rate, 3e-4);
  EXPECT_EQ(desk_preset(Task::kSentiment).msd_rates, (std::vector<double>{0.1, 0.2, 0.3}));
  EXPECT_EQ(desk_preset(Task::kSentiment).epochs, 5u);
  const auto full = full_scale_preset(Task::kEmotion);
  EXPECT_EQ(full.learning_rate, 2.99e-3);
  EXPECT_EQ(full.model.hidden, 768u);
  EXPECT_EQ(full.model.patch, 32u);
  EXPECT_EQ(full.encoding().num_patches(), 49u);
  EXPECT_EQ(full_scale_preset(Task::kDesire).learning_rate, 3.1e-3);
  EXPECT_NO_THROW(full.validate());
}

TEST(Training, IdenticalSeedsGiveIdenticalLogs) {
  const auto a = train(tiny_config(), tiny_data());
  const auto b = train(tiny_config(), tiny_data());
  ASSERT_EQ(a.log.size(), 2u);
  EXPECT_EQ(log_lines(a.log), log_lines(b.log));
  std::size_t best = 0;
  for (const auto& e : a.log) best += e.best;
  EXPECT_GE(best, 1u);
  EXPECT_EQ(a.best.epoch, a.log[0].val_loss <= a.log[1].val_loss ? 1u : 2u);
  TrainConfig other = tiny_config();
  other.seed = 8;
  EXPECT_NE(log_lines(train(other, tiny_data()).log), log_lines(a.log));
}

TEST(Training, CheckpointRoundTripIsBitwise) {
  auto result = train(tiny_config(), tiny_data());
  const auto dir = testutil::temp_dir("ckpt");
  save_checkpoint(dir / "model.bin", result.best);
  const Checkpoint loaded = load_checkpoint(dir / "model.bin");
  EXPECT_EQ(loaded.config.to_text(), result.best.config.to_text());
  EXPECT_EQ(loaded.vilt_vocab, result.best.vilt_vocab);

  const auto before = evaluate(*result.model, tiny_data().test, tiny_data().root);
  const auto after = evaluate(loaded, tiny_data().test, tiny_data().root);
  EXPECT_EQ(before, after);
  auto restored = restore_model(loaded);
  const auto enc = encode_examples(*restored, tiny_data().test, tiny_data().root);
  const auto enc_orig = encode_examples(*result.model, tiny_data().test, tiny_data().root);
  for (std::size_t i = 0; i < enc.size(); ++i) {
    EXPECT_EQ(restored->logits(enc[i]), result.model->logits(enc_orig[i]));
  }
}

TEST(Training, CorruptCheckpointIsAFormatError) {
  auto result = train(tiny_config(), tiny_data());
  const auto dir = testutil::temp_dir("ckpt_bad");
  save_checkpoint(dir / "model.bin", result.best);
  std::fstream f(dir / "model.bin", std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(200);
  f.put('\x5a');
  f.close();
  EXPECT_THROW(load_checkpoint(dir / "model.bin"), FormatError);
  std::ofstream(dir / "junk.bin") << "not a checkpoint";
  EXPECT_THROW(load_checkpoint(dir / "junk.bin"), FormatError);
}

TEST(Training, EvaluationIgnoresBatchSize) {
  auto result = train(tiny_config(), tiny_data());
  const auto enc = encode_examples(*result.model, tiny_data().val, tiny_data().root);
  const auto one = evaluate_encoded(*result.model, enc);
  TrainConfig wide = result.best.config;
  wide.eval_batch = 4;
  Checkpoint ckpt = result.best;
  ckpt.config = wide;
  auto model = restore_model(ckpt);
  const auto four = evaluate_encoded(*model, encode_examples(*model, tiny_data().val, tiny_data().root));
  EXPECT_EQ(one.predictions, four.predictions);
  EXPECT_NEAR(one.loss, four.loss, 1e-12);
}

TEST(Training, MissingLabelsAndEmptySplitsAreRejected) {
  DatasetSplits empty = tiny_data();
  empty.val.clear();
  EXPECT_THROW(train(tiny_config(), empty), ContractError);
  TrainConfig emotion = tiny_config();
  emotion.task = Task::kEmotion;
  EXPECT_THROW(train(emotion, tiny_data()), LabelError);
}

TEST(Sweep, GridEnumerationAndRanking) {
  EXPECT_EQ(grid_size(reference_sweep_space()), 48000u);
  EXPECT_THROW(grid_size({{"train.epochs", {}}}), ContractError);
  TrainConfig base = tiny_config();
  base.epochs = 1;
  const SweepSpace space = {{"train.batch", {"4", "8"}}, {"train.learning_rate", {"1e-3", "1e-4"}}};
  EXPECT_THROW(sweep(space, 0, base, tiny_data()), ContractError);
  const auto report = sweep(space, 10, base, tiny_data());
  EXPECT_EQ(report.grid_size, 4u);
  ASSERT_EQ(report.rows.size(), 4u);
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    const auto& prev = report.rows[i - 1];
    const auto& row = report.rows[i];
    EXPECT_GE(prev.val_macro_f1, row.val_macro_f1);
    if (prev.val_macro_f1 == row.val_macro_f1) EXPECT_LT(prev.index, row.index);
  }
  for (const auto& row : report.rows) {
    EXPECT_EQ(row.config.train_batch, row.index < 2 ? 4u : 8u);
    EXPECT_EQ(row.config.learning_rate, row.index % 2 == 0 ? 1e-3 : 1e-4);
  }
  EXPECT_NE(report.table().find("train.batch"), std::string::npos);
}

TEST(Sweep, BudgetSubsampleIsSeededAndOrdered) {
  TrainConfig base = tiny_config();
  base.epochs = 1;
  const SweepSpace space = {{"train.batch", {"4", "8", "12"}}, {"model.hidden", {"8", "16"}}};
  const auto a = sweep(space, 2, base, tiny_data());
  const auto b = sweep(space, 2, base, tiny_data());
  ASSERT_EQ(a.rows.size(), 2u);
  EXPECT_EQ(a.grid_size, 6u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(a.rows[i].index, b.rows[i].index);
    EXPECT_EQ(a.rows[i].val_macro_f1, b.rows[i].val_macro_f1);
  }
  const auto single = sweep({{"train.batch", {"4"}}}, 1, base, tiny_data());
  ASSERT_EQ(single.rows.size(), 1u);
  EXPECT_EQ(single.rows[0].config.train_batch, 4u);
}

TEST(Ablation, TwelveCellsInOrder) {
  TrainConfig base = tiny_config();
  base.epochs = 1;
  const auto report = ablate(base, tiny_data());
  ASSERT_EQ(report.cells.size(), 12u);
  std::size_t i = 0;
  for (Fusion f : {Fusion::kEarly, Fusion::kLate}) {
    for (bool msd : {true, false}) {
      for (Branches b : {Branches::kBoth, Branches::kViltOnly, Branches::kVaultOnly}) {
        const auto& cell = report.cells[i++];
        EXPECT_EQ(cell.fusion, f);
        EXPECT_EQ(cell.msd, msd);
        EXPECT_EQ(cell.branches, b);
        EXPECT_EQ(cell.flagged, f == Fusion::kLate && msd);
        EXPECT_EQ(cell.test.count, tiny_data().test.size());
        EXPECT_GT(cell.parameter_count, 0u);
      }
    }
  }
  const auto& both = report.cell(Fusion::kEarly, true, Branches::kBoth);
  EXPECT_GT(both.parameter_count,
            report.cell(Fusion::kEarly, true, Branches::kViltOnly).parameter_count);
  EXPECT_GT(both.parameter_count,
            report.cell(Fusion::kEarly, true, Branches::kVaultOnly).parameter_count);
  std::size_t lines = 0;
  for (char c : report.to_jsonl()) lines += c == '\n';
  EXPECT_EQ(lines, 12u);
  EXPECT_NE(report.table().find("late"), std::string::npos);
}

TEST(GradCheck, EndToEndDeskModelPasses) {
  GradCheckOptions opt;
  opt.samples = 25;
  opt.seed = 1;
  const auto report = end_to_end_grad_check(desk_preset(Task::kSentiment), 1, opt);
  EXPECT_EQ(report.entries.size(), 25u);
  EXPECT_TRUE(report.passed) << report.max_relative_error;
}

// Central differences carry ~1e-11 absolute roundoff at h = 1e-5, so entries
// are compared absolutely, and relatively wherever |g| > 1e-6.
TEST(GradCheck, EveryVariantAgreesWhereResolvable) {
  for (Fusion fusion : {Fusion::kEarly, Fusion::kLate}) {
    for (CheckDropout dropout : {CheckDropout::kDisabled, CheckDropout::kFrozen}) {
      TrainConfig cfg = tiny_config();
      cfg.fusion = fusion;
      GradCheckOptions opt;
      opt.samples = 1500;
      opt.seed = 4;
      const auto report = end_to_end_grad_check(cfg, 2, opt, dropout);
      std::size_t resolvable = 0;
      for (const auto& e : report.entries) {
        EXPECT_LT(std::abs(e.analytic - e.numeric), 1e-9) << e.name << "[" << e.index << "]";
        if (std::max(std::abs(e.analytic), std::abs(e.numeric)) > 1e-6) {
          ++resolvable;
          EXPECT_LT(e.relative_error, 1e-4) << e.name << "[" << e.index << "]";
        }
      }
      EXPECT_GT(resolvable, 300u);
    }
  }
}
