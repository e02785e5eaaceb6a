#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "mmtf/errors.hpp"
#include "mmtf/fusion_head.hpp"
#include "mmtf/model.hpp"
#include "mmtf/ops.hpp"
#include "mmtf/optimizer.hpp"
#include "test_util.hpp"

using namespace mmtf;
using testutil::random_tensor;
using testutil::values;

namespace {

MsdHead make_head(ModelParameters& params, std::size_t width, std::size_t classes,
                  double base, std::vector<double> rates) {
  RandomStream init(3, "init");
  return MsdHead(params, "head", width, classes, base, std::move(rates), init);
}

bool any_nonzero_grad(const ModelParameters& params, std::string_view prefix) {
  for (const auto& p : params.entries()) {
    if (p.name.rfind(prefix, 0) != 0 || !p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) {
      if (g != 0.0) return true;
    }
  }
  return false;
}

MultimodalExample make_example(std::string id, std::string title, std::string caption,
                               std::size_t label) {
  MultimodalExample ex;
  ex.id = std::move(id);
  ex.title = std::move(title);
  ex.caption = std::move(caption);
  ex.sentiment = label;
  return ex;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.model.hidden = 16;
  c.model.heads = 2;
  c.model.mlp = 32;
  c.model.layers = 1;
  c.model.aux_layers = 1;
  c.model.late_width = 16;
  c.max_length = 10;
  return c;
}

}  // namespace

TEST(EarlyFuse, LengthIsSumOfWidths) {
  RandomStream rng(17, "widths");
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t dv = 1 + rng.below(40), dva = 1 + rng.below(40);
    const Tensor v = random_tensor({dv}, 100 + trial), va = random_tensor({dva}, 200 + trial);
    const Tensor ifv = early_fuse(v, va).vector;
    ASSERT_EQ(ifv.shape(), (Shape{dv + dva}));
    for (std::size_t i = 0; i < dv; ++i) EXPECT_EQ(ifv.at(i), v.at(i));
    for (std::size_t i = 0; i < dva; ++i) EXPECT_EQ(ifv.at(dv + i), va.at(i));
  }
  EXPECT_EQ(early_fuse(Tensor::zeros({768}), Tensor::zeros({768})).vector.numel(), 1536u);
  EXPECT_EQ(early_fuse(Tensor::zeros({3, 5}), Tensor::zeros({3, 7})).vector.shape(),
            (Shape{3, 12}));
}

TEST(EarlyFuse, ZeroSecondBranchGivesZeroSecondHalf) {
  const Tensor ifv = early_fuse(random_tensor({64}, 1), Tensor::zeros({64})).vector;
  for (std::size_t i = 64; i < 128; ++i) EXPECT_EQ(ifv.at(i), 0.0);
}

TEST(EarlyFuse, GradientSplitsBackToBranches) {
  const Tensor v = random_tensor({4}, 2, true), va = random_tensor({3}, 3, true);
  const Tensor w = random_tensor({7}, 4);
  backward(ops::sum(ops::mul(early_fuse(v, va).vector, w)));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(v.grad()[i], w.at(i));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(va.grad()[i], w.at(4 + i));
}

TEST(EarlyFuse, RejectsNonFiniteInput) {
  Tensor bad = Tensor::zeros({2});
  bad.mutable_data()[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(early_fuse(bad, Tensor::zeros({2})), NumericError);
}

TEST(MsdHead, DefaultsAndSingleOutputLayer) {
  ModelParameters params;
  RandomStream init(1, "init");
  MsdHead head(params, "head", 8, 3, kDefaultBaseDropout, kDefaultSampleRates, init);
  EXPECT_EQ(head.sample_count(), 3u);
  EXPECT_EQ(params.size(), 2u);
  EXPECT_EQ(head.output_layer.weight.shape(), (Shape{8, 3}));
  EXPECT_THROW(make_head(params, 8, 3, 1.0, {0.1}), ContractError);
  ModelParameters other;
  EXPECT_THROW(make_head(other, 8, 3, 0.5, {0.1, -0.2}), ContractError);
}

TEST(MsdHead, EvalEqualsPlainLinearHead) {
  ModelParameters params;
  const MsdHead head = make_head(params, 10, 4, 0.5, {0.1, 0.2, 0.3});
  RandomStream stream(9, "dropout");
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Tensor ifv = random_tensor({2, 10}, seed, false, 3.0);
    const auto out = msd_forward({ifv}, head, Mode::kEval, &stream);
    ASSERT_EQ(out.size(), 1u);
    const Tensor plain = ops::add_row(ops::matmul(ifv, head.output_layer.weight),
                                      head.output_layer.bias);
    EXPECT_EQ(values(out[0]), values(plain));
  }
}

TEST(MsdHead, ZeroRatesGiveIdenticalSamples) {
  ModelParameters params;
  const MsdHead head = make_head(params, 6, 3, 0.5, {0.0, 0.0, 0.0});
  RandomStream stream(2, "dropout");
  const auto out = msd_forward({random_tensor({3, 6}, 5)}, head, Mode::kTrain, &stream);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(values(out[0]), values(out[1]));
  EXPECT_EQ(values(out[0]), values(out[2]));
}

TEST(MsdHead, TrainSamplesReproducibleAndDistinct) {
  ModelParameters params;
  const MsdHead head = make_head(params, 32, 3, 0.5, {0.1, 0.2, 0.3});
  const Tensor ifv = random_tensor({2, 32}, 6);
  RandomStream s1(11, "dropout"), s2(11, "dropout");
  const auto a = msd_forward({ifv}, head, Mode::kTrain, &s1);
  const auto b = msd_forward({ifv}, head, Mode::kTrain, &s2);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(values(a[i]), values(b[i]));
  EXPECT_NE(values(a[0]), values(a[1]));
  EXPECT_NE(values(a[1]), values(a[2]));
}

TEST(MsdLoss, MeanOfSampleLosses) {
  const std::vector<std::size_t> targets = {2, 0};
  std::vector<Tensor> logits;
  double expected = 0.0;
  for (std::uint64_t s = 0; s < 3; ++s) {
    logits.push_back(random_tensor({2, 3}, 30 + s, false, 2.0));
    expected += ops::cross_entropy(logits.back(), targets).item();
  }
  EXPECT_NEAR(msd_loss(logits, targets).item(), expected / 3.0, 1e-12);
  EXPECT_THROW(msd_loss(logits, {2, 3}), LabelError);
  EXPECT_THROW(msd_loss({}, targets), ContractError);
}

TEST(MsdLoss, IdenticalMasksMatchSingleSampleLossAndGradient) {
  const std::vector<std::size_t> targets = {1, 0, 2};
  const Tensor ifv = random_tensor({3, 8}, 12);

  ModelParameters msd_params;
  const MsdHead msd = make_head(msd_params, 8, 3, 0.3, {0.0, 0.0, 0.0});
  RandomStream s1(4, "dropout");
  const Tensor l_msd = msd_loss(msd_forward({ifv}, msd, Mode::kTrain, &s1), targets);
  backward(l_msd);

  ModelParameters single_params;
  const MsdHead single = make_head(single_params, 8, 3, 0.3, {});
  RandomStream s2(4, "dropout");
  const Tensor l_single =
      msd_loss(msd_forward({ifv}, single, Mode::kTrain, &s2), targets);
  backward(l_single);

  EXPECT_NEAR(l_msd.item(), l_single.item(), 1e-12);
  const auto g_msd = msd.output_layer.weight.grad();
  const auto g_single = single.output_layer.weight.grad();
  ASSERT_EQ(g_msd.size(), g_single.size());
  for (std::size_t i = 0; i < g_msd.size(); ++i) EXPECT_NEAR(g_msd[i], g_single[i], 1e-12);
}

TEST(LateFusion, ShapeAndDisjointStacks) {
  ModelParameters params;
  RandomStream init(8, "init");
  LateFusionHead head(params, "late", {16, 16}, 12, 5, init);
  EXPECT_EQ(head.feature_width(), 24u);
  const Tensor out = late_fuse_forward(random_tensor({16}, 1), random_tensor({16}, 2), head);
  EXPECT_EQ(out.shape(), (Shape{5}));
  EXPECT_FALSE(head.stacks[0].first.weight.same_storage(head.stacks[1].first.weight));
  EXPECT_FALSE(head.stacks[0].second.weight.same_storage(head.stacks[1].second.weight));
  EXPECT_EQ(params.size(), 10u);
  EXPECT_THROW(head.features({random_tensor({16}, 1)}), DimensionError);
}

TEST(LateFusion, ZeroedStackZeroesItsHalf) {
  ModelParameters params;
  RandomStream init(8, "init");
  LateFusionHead head(params, "late", {6, 6}, 4, 3, init);
  for (Tensor t : {head.stacks[1].second.weight, head.stacks[1].second.bias}) {
    for (auto& v : t.mutable_data()) v = 0.0;
  }
  const Tensor f = head.features({random_tensor({6}, 1), random_tensor({6}, 2)});
  std::size_t support = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    if (f.at(i) != 0.0) ++support;
    if (i >= 4) EXPECT_EQ(f.at(i), 0.0);
  }
  EXPECT_EQ(support, 4u);
}

TEST(Predict, ArgmaxWithLowestIndexTieBreak) {
  EXPECT_EQ(predict(std::vector<double>{0.1, 0.9, 0.0}), 1u);
  EXPECT_EQ(predict(std::vector<double>{0.5, 0.5}), 0u);
  EXPECT_THROW(predict(std::vector<double>{0.5}), ContractError);
  EXPECT_THROW(predict(std::vector<double>{0.1, std::nan("")}), NumericError);
}

TEST(Predict, InvariantUnderPositiveAffineMaps) {
  RandomStream rng(21, "affine");
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> z(2 + rng.below(6));
    for (auto& v : z) v = 4.0 * rng.uniform() - 2.0;
    const std::size_t base = predict(z);
    const double scale = 0.25 + 4.0 * rng.uniform(), shift = 10.0 * rng.uniform() - 5.0;
    std::vector<double> moved = z;
    for (auto& v : moved) v = scale * v + shift;
    EXPECT_EQ(predict(moved), base);
  }
}

TEST(ModelHead, EarlyFusionGradientReachesBothBranches) {
  const auto vocab = TokenVocabulary::build({"a b c d e"});
  MmtfModel model(tiny_config(), vocab, vocab);
  const auto e1 = model.encode(make_example("1", "a b", "c", 0), random_tensor({16, 16}, 1));
  const auto e2 = model.encode(make_example("2", "d", "e a", 2), random_tensor({16, 16}, 2));
  model.parameters().zero_grad();
  backward(model.loss({&e1, &e2}, Mode::kTrain));
  EXPECT_TRUE(any_nonzero_grad(model.parameters(), "vilt."));
  EXPECT_TRUE(any_nonzero_grad(model.parameters(), "vault."));
  EXPECT_TRUE(any_nonzero_grad(model.parameters(), "vault_text."));
  EXPECT_TRUE(any_nonzero_grad(model.parameters(), "head."));
}

TEST(ModelHead, SampleWeightsShareStorageAcrossSteps) {
  const auto vocab = TokenVocabulary::build({"a b c"});
  TrainConfig cfg = tiny_config();
  cfg.fusion = Fusion::kLate;
  MmtfModel model(cfg, vocab, vocab);
  EXPECT_TRUE(cfg.flagged_combination());
  EXPECT_TRUE(model.head().output_layer.weight.same_storage(
      model.late_head()->output_layer.weight));
  const auto ex = model.encode(make_example("1", "a b", "c", 1), random_tensor({16, 16}, 3));
  Adam adam(model.parameters(), AdamOptions{});
  const Tensor before = model.head().output_layer.weight;
  for (int step = 0; step < 2; ++step) {
    backward(model.loss({&ex}, Mode::kTrain));
    adam.step(model.parameters());
    EXPECT_TRUE(model.head().output_layer.weight.same_storage(before));
    EXPECT_TRUE(model.parameters().at("late.output.weight").same_storage(before));
  }
  EXPECT_EQ(model.forward({&ex}, Mode::kTrain).size(), 3u);
}
