// Acceptance harness: one PASS/FAIL line per criterion, exit 1 on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mmtf/checkpoint.hpp"
#include "mmtf/diagnostics.hpp"
#include "mmtf/errors.hpp"
#include "mmtf/experiments.hpp"
#include "mmtf/fusion_head.hpp"
#include "mmtf/labels.hpp"
#include "mmtf/metrics.hpp"
#include "mmtf/ops.hpp"
#include "mmtf/synthetic.hpp"
#include "mmtf/trainer.hpp"
#include "test_util.hpp"

using namespace mmtf;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const std::function<Verdict()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = check();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!v.pass) ++failures;
  std::printf("criterion %d: %s  %s  [%s] (%.1f s)\n", id, v.pass ? "PASS" : "FAIL",
              title.c_str(), v.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.at(i) - b.at(i)));
  return m;
}

const DatasetSplits& reference_data() {
  static const DatasetSplits data = [] {
    SyntheticSpec spec;  // sentiment, 600/100/200, seed 7, noise-free
    const auto dir = testutil::temp_dir("acceptance_data");
    generate_synthetic(spec, dir);
    return load_splits(dir, spec.task);
  }();
  return data;
}

TrainConfig reference_config() { return desk_preset(Task::kSentiment); }

std::vector<EncodedExample> encode_first(MmtfModel& model, std::size_t n) {
  const auto& data = reference_data();
  std::vector<MultimodalExample> some(data.train.begin(), data.train.begin() + n);
  return encode_examples(model, some, data.root);
}

std::unique_ptr<MmtfModel> fresh_model(const TrainConfig& config) {
  const auto& data = reference_data();
  return std::make_unique<MmtfModel>(config, build_vocab(data.train), build_vocab(data.train));
}

Verdict gradient_correctness() {
  GradCheckOptions opt;
  opt.samples = 25;
  opt.h = 1e-5;
  opt.tolerance = 1e-4;
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  bool all = true;
  std::size_t entries = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto r = end_to_end_grad_check(reference_config(), seed, opt);
    worst = std::max(worst, r.max_relative_error);
    entries += r.entries.size();
    all = all && r.passed;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {all && entries == 125 && secs < 60.0,
          std::to_string(entries) + " entries over seeds 1-5, max rel err " + fmt("%.3e", worst) +
              " (< 1e-4), " + fmt("%.1f", secs) + " s (< 60 s)"};
}

Verdict msd_equivalences() {
  ModelParameters params;
  RandomStream init(1, "init");
  const MsdHead head(params, "head", 128, 3, 0.5, {0.1, 0.2, 0.3}, init);
  RandomStream stream(2, "dropout");
  bool eval_exact = true;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Tensor ifv = testutil::random_tensor({4, 128}, s);
    const auto out = msd_forward({ifv}, head, Mode::kEval, &stream);
    const Tensor plain =
        ops::add_row(ops::matmul(ifv, head.output_layer.weight), head.output_layer.bias);
    eval_exact = eval_exact && out.size() == 1 && testutil::values(out[0]) == testutil::values(plain);
  }

  const MsdHead identical(head.output_layer, 0.5, {0.0, 0.0, 0.0});
  const MsdHead single(head.output_layer, 0.5, {});
  double loss_gap = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Tensor ifv = testutil::random_tensor({4, 128}, 100 + s);
    const std::vector<std::size_t> targets = {0, 1, 2, s % 3};
    RandomStream a(s, "dropout"), b(s, "dropout");
    const double l3 = msd_loss(msd_forward({ifv}, identical, Mode::kTrain, &a), targets).item();
    const double l1 = msd_loss(msd_forward({ifv}, single, Mode::kTrain, &b), targets).item();
    loss_gap = std::max(loss_gap, std::abs(l3 - l1));
  }

  auto m1 = fresh_model(reference_config());
  auto m2 = fresh_model(reference_config());
  const auto e1 = encode_first(*m1, 4);
  const auto e2 = encode_first(*m2, 4);
  std::vector<const EncodedExample*> b1, b2;
  for (std::size_t i = 0; i < 4; ++i) {
    b1.push_back(&e1[i]);
    b2.push_back(&e2[i]);
  }
  NoGradGuard no_grad;
  const auto s1 = m1->forward(b1, Mode::kTrain);
  const auto s2 = m2->forward(b2, Mode::kTrain);
  bool bitwise = s1.size() == 3 && s2.size() == 3;
  for (std::size_t i = 0; bitwise && i < 3; ++i) {
    bitwise = testutil::values(s1[i]) == testutil::values(s2[i]);
  }
  const bool distinct = testutil::values(s1[0]) != testutil::values(s1[1]);
  return {eval_exact && loss_gap <= 1e-12 && bitwise && distinct,
          std::string("(a) eval == linear head ") + (eval_exact ? "exact" : "MISMATCH") +
              "; (b) identical-mask loss gap " + fmt("%.2e", loss_gap) + " (<= 1e-12)" +
              "; (c) train samples " + (bitwise ? "bitwise reproducible" : "DIFFER") +
              (distinct ? ", masks independent" : ", masks NOT independent")};
}

Verdict fusion_contracts() {
  RandomStream rng(3, "widths");
  std::size_t ok = 0;
  for (int i = 0; i < 10; ++i) {
    const std::size_t dv = 1 + rng.below(1024), dva = 1 + rng.below(1024);
    const auto ifv = early_fuse(testutil::random_tensor({dv}, i), testutil::random_tensor({dva}, 50 + i));
    ok += ifv.vector.numel() == dv + dva;
  }
  auto model = fresh_model(reference_config());
  const auto enc = encode_first(*model, 4);
  model->parameters().zero_grad();
  backward(model->loss({&enc[0], &enc[1], &enc[2], &enc[3]}, Mode::kTrain));
  auto grad_norm = [&](std::string_view prefix) {
    double s = 0.0;
    for (const auto& p : model->parameters().entries()) {
      if (p.name.rfind(prefix, 0) != 0 || !p.tensor.has_grad()) continue;
      for (double g : p.tensor.grad()) s += g * g;
    }
    return std::sqrt(s);
  };
  const double gv = grad_norm("vilt."), gva = grad_norm("vault."), gaux = grad_norm("vault_text.");
  return {ok == 10 && gv > 0.0 && gva > 0.0 && gaux > 0.0,
          std::to_string(ok) + "/10 IFV widths == d_v + d_va; grad norms vilt " + fmt("%.3e", gv) +
              ", vault " + fmt("%.3e", gva) + ", vault language encoder " + fmt("%.3e", gaux)};
}

Verdict masking_and_encoding() {
  auto model = fresh_model(reference_config());
  const auto enc = encode_first(*model, 8);
  double worst = 0.0;
  for (const auto& ex : enc) {
    for (bool compact : {false, true}) {
      BranchForwardOptions opt;
      opt.compact_padding = compact;
      EncodedExample perturbed = ex;
      for (auto* e : {&perturbed.vilt, &perturbed.vault}) {
        for (std::size_t i = e->attended_length(); i < e->token_ids.size(); ++i) {
          e->token_ids[i] = 4 + (i * 7) % 20;
          e->segment_ids[i] = 1;
        }
      }
      worst = std::max(worst, max_abs_diff(vilt_branch_forward(ex.vilt, *model->vilt_branch(), opt),
                                           vilt_branch_forward(perturbed.vilt, *model->vilt_branch(), opt)));
      worst = std::max(worst, max_abs_diff(
                                  vault_branch_forward(ex.vault, *model->aux_encoder(), *model->vault_branch(), opt),
                                  vault_branch_forward(perturbed.vault, *model->aux_encoder(), *model->vault_branch(), opt)));
    }
  }

  // String-level layout oracle over random title/caption pairs.
  const std::vector<std::string> words = {"sun", "rain", "cat", "dog", "red", "blue", "fast", "slow"};
  const auto vocab = TokenVocabulary::build({"sun rain cat dog red blue"});
  RandomStream rng(9, "pairs");
  std::size_t matches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> title, caption;
    const std::size_t nt = rng.below(7), nc = (nt == 0) + rng.below(9);
    for (std::size_t i = 0; i < nt; ++i) title.push_back(words[rng.below(words.size())]);
    for (std::size_t i = 0; i < nc; ++i) caption.push_back(words[rng.below(words.size())]);
    const std::size_t len = 3 + rng.below(16);
    std::string t, c;
    for (const auto& w : title) t += w + " ";
    for (const auto& w : caption) c += w + " ";
    MultimodalExample ex;
    ex.id = "p";
    ex.title = t;
    ex.caption = c;
    EncodingConfig cfg;
    cfg.max_length = len;
    const auto e = encode_pair(ex, Tensor::zeros({16, 16}), vocab, cfg);

    std::vector<std::string> want{"[CLS]"};
    std::vector<std::size_t> seg{0};
    std::size_t room = len - 3;
    auto known = [&](const std::string& w) { return vocab.id(w) != TokenVocabulary::kUnk ? w : "[UNK]"; };
    for (const auto& w : title) {
      if (room == 0) break;
      want.push_back(known(w));
      seg.push_back(0);
      --room;
    }
    want.push_back("[SEP]");
    seg.push_back(0);
    for (const auto& w : caption) {
      if (room == 0) break;
      want.push_back(known(w));
      seg.push_back(1);
      --room;
    }
    want.push_back("[SEP]");
    seg.push_back(1);
    const std::size_t used = want.size();
    want.resize(len, "[PAD]");
    seg.resize(len, 0);
    std::vector<std::string> got;
    for (auto id : e.token_ids) got.push_back(vocab.token(id));
    bool mask_ok = true;
    for (std::size_t i = 0; i < len; ++i) {
      mask_ok = mask_ok && (e.text_mask[i] == (i < used ? MaskValue::kAttend : MaskValue::kIgnore));
    }
    matches += got == want && e.segment_ids == seg && mask_ok;
  }
  return {worst < 1e-9 && matches == 100,
          "padded-token perturbation max |delta pooled| " + fmt("%.2e", worst) +
              " (< 1e-9, with and without padding compaction); layout oracle " +
              std::to_string(matches) + "/100"};
}

Verdict metrics_oracle() {
  RandomStream rng(11, "metrics");
  std::size_t agree = 0, total = 0;
  for (std::size_t k : {2u, 3u, 6u, 7u}) {
    for (int trial = 0; trial < 1000; ++trial) {
      const std::size_t n = 1 + rng.below(60);
      std::vector<std::size_t> pred(n), gold(n);
      for (std::size_t i = 0; i < n; ++i) {
        gold[i] = rng.below(k);
        pred[i] = rng.below(2) ? gold[i] : rng.below(k);
      }
      // Brute force: one pass over the pairs per class.
      std::vector<double> p(k), r(k), f(k);
      double mp = 0, mr = 0, mf = 0;
      std::size_t hits = 0;
      for (std::size_t i = 0; i < n; ++i) hits += pred[i] == gold[i];
      for (std::size_t c = 0; c < k; ++c) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < n; ++i) {
          tp += pred[i] == c && gold[i] == c;
          fp += pred[i] == c && gold[i] != c;
          fn += pred[i] != c && gold[i] == c;
        }
        p[c] = tp + fp ? double(tp) / double(tp + fp) : 0.0;
        r[c] = tp + fn ? double(tp) / double(tp + fn) : 0.0;
        f[c] = p[c] + r[c] > 0 ? 2.0 * p[c] * r[c] / (p[c] + r[c]) : 0.0;
        mp += p[c];
        mr += r[c];
        mf += f[c];
      }
      const auto m = macro_metrics(pred, gold, k);
      agree += m.precision == p && m.recall == r && m.f1 == f && m.macro_precision == mp / double(k) &&
               m.macro_recall == mr / double(k) && m.macro_f1 == mf / double(k) &&
               m.accuracy == double(hits) / double(n);
      ++total;
    }
  }
  const double hand = macro_metrics({0, 1, 0, 1}, {0, 0, 1, 1}, 2).macro_f1;
  return {agree == total && hand == 0.5,
          std::to_string(agree) + "/" + std::to_string(total) +
              " random cases exact (K in {2,3,6,7}); hand case macro-F1 " + fmt("%.4f", hand)};
}

// Test macro-F1 of the full model and of both unimodal masks.
Verdict learnability(std::unique_ptr<TrainResult>& full_run) {
  const auto& data = reference_data();
  const auto t0 = std::chrono::steady_clock::now();
  full_run = std::make_unique<TrainResult>(train(reference_config(), data));
  const double full = evaluate(*full_run->model, data.test, data.root).macro_f1;
  const double t_full = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  double uni[2];
  const ModalityMask masks[2] = {ModalityMask::kTextOnly, ModalityMask::kImageOnly};
  for (int i = 0; i < 2; ++i) {
    TrainConfig cfg = reference_config();
    cfg.modality = masks[i];
    auto run = train(cfg, data);
    uni[i] = evaluate(*run.model, data.test, data.root).macro_f1;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {full >= 0.95 && uni[0] <= 0.75 && uni[1] <= 0.75 && t_full < 600.0,
          "full model test macro-F1 " + percent(full) + " (>= 95.00), text-only " + percent(uni[0]) +
              ", image-only " + percent(uni[1]) + " (<= 75.00); full run " + fmt("%.1f", t_full) +
              " s, all three " + fmt("%.1f", secs) + " s (< 600 s each)"};
}

Verdict ablation_directions() {
  const auto& data = reference_data();
  const auto rep = ablate(reference_config(), data);
  const double full = rep.cell(Fusion::kEarly, true, Branches::kBoth).test.macro_f1;
  struct Pair {
    std::string name;
    double other;
  };
  const std::vector<Pair> rivals = {
      {"late fusion", rep.cell(Fusion::kLate, false, Branches::kBoth).test.macro_f1},
      {"msd off", rep.cell(Fusion::kEarly, false, Branches::kBoth).test.macro_f1},
      {"vilt only", rep.cell(Fusion::kEarly, true, Branches::kViltOnly).test.macro_f1},
      {"vault only", rep.cell(Fusion::kEarly, true, Branches::kVaultOnly).test.macro_f1}};
  bool hard_fail = false;
  std::string detail = "full " + percent(full);
  for (const auto& r : rivals) {
    const bool holds = full >= r.other - 0.02;
    hard_fail = hard_fail || full < r.other - 0.05;
    detail += "; vs " + r.name + " " + percent(r.other) + (holds ? " holds" : " REVERSED");
  }
  return {!hard_fail, detail};
}

Verdict label_plumbing() {
  const std::vector<std::pair<std::string, std::size_t>> train_counts = {
      {"vengeance", 277}, {"curiosity", 634}, {"social-contact", 437}, {"family", 873},
      {"tranquility", 245}, {"romance", 692}, {"none", 2969}};
  const auto& desire = LabelVocabulary::for_task(Task::kDesire);
  std::size_t counts[2] = {0, 0};
  for (const auto& [name, n] : train_counts) counts[binarize_desire(desire.index_of(name))] += n;
  return {counts[0] == 3158 && counts[1] == 2969,
          "train desire " + std::to_string(counts[0]) + " / not-desire " + std::to_string(counts[1]) +
              " (expected 3158 / 2969)"};
}

Verdict determinism(const TrainResult& first) {
  const auto& data = reference_data();
  const auto second = train(reference_config(), data);
  bool same_log = first.log.size() == second.log.size();
  for (std::size_t i = 0; same_log && i < first.log.size(); ++i) {
    same_log = first.log[i].to_json() == second.log[i].to_json();
  }
  const auto dir = testutil::temp_dir("acceptance_ckpt");
  save_checkpoint(dir / "checkpoint.bin", first.best);
  const auto before = evaluate(*first.model, data.test, data.root);
  const auto after = evaluate(load_checkpoint(dir / "checkpoint.bin"), data.test, data.root);
  auto original = encode_examples(*first.model, data.test, data.root);
  auto restored = restore_model(load_checkpoint(dir / "checkpoint.bin"));
  auto reenc = encode_examples(*restored, data.test, data.root);
  bool logits_equal = true;
  for (std::size_t i = 0; i < original.size(); ++i) {
    logits_equal = logits_equal && first.model->logits(original[i]) == restored->logits(reenc[i]);
  }
  return {same_log && before == after && logits_equal,
          std::string("epoch logs ") + (same_log ? "bitwise identical" : "DIFFER") +
              "; checkpoint reload metrics " + (before == after ? "identical" : "DIFFER") +
              ", test logits " + (logits_equal ? "bitwise identical" : "DIFFER")};
}

}  // namespace

int main() {
  std::unique_ptr<TrainResult> full_run;
  report(1, "gradient correctness", gradient_correctness);
  report(2, "MSD equivalences", msd_equivalences);
  report(3, "fusion contracts", fusion_contracts);
  report(4, "masking and encoding invariants", masking_and_encoding);
  report(5, "metrics oracle", metrics_oracle);
  report(6, "learnability", [&] { return learnability(full_run); });
  report(7, "ablation directions", ablation_directions);
  report(8, "label plumbing", label_plumbing);
  report(9, "determinism and persistence", [&] {
    if (!full_run) full_run = std::make_unique<TrainResult>(train(reference_config(), reference_data()));
    return determinism(*full_run);
  });
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
