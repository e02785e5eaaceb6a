// Command-line entry point: gen-data, import-msed, train, eval, ablate,
// sweep, gradcheck.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mmtf/checkpoint.hpp"
#include "mmtf/diagnostics.hpp"
#include "mmtf/errors.hpp"
#include "mmtf/experiments.hpp"
#include "mmtf/synthetic.hpp"
#include "mmtf/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace mmtf;

namespace {

enum ExitCode {
  kOk = 0,
  kOther = 1,
  kUsage = 2,
  kConfig = 3,
  kData = 4,
  kNumeric = 5,
};

constexpr const char* kOutputRootVar = "MMTF_OUTPUT_ROOT";

fs::path output_root() {
  const char* env = std::getenv(kOutputRootVar);
  return env && *env ? fs::path(env) : fs::path("runs");
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

// Written when a command starts, rewritten with the exit status at the end.
class RunManifest {
 public:
  RunManifest(std::string command, fs::path dir)
      : command_(std::move(command)), dir_(std::move(dir)) {
    doc_["command"] = command_;
    doc_["started_at"] = utc_now();
    doc_["status"] = "running";
    doc_["config"] = json::object();
    doc_["inputs"] = json::object();
    doc_["outputs"] = json::array();
  }

  void set_config(const TrainConfig& config) {
    json c = json::object();
    for (const auto& [k, v] : config.to_key_values()) c[k] = v;
    doc_["config"] = c;
    doc_["seed"] = config.seed;
  }
  void set(const std::string& key, json value) { doc_[key] = std::move(value); }
  void input(const fs::path& path) {
    if (fs::is_regular_file(path)) doc_["inputs"][path.string()] = file_checksum(path);
  }
  void output(const fs::path& path) { doc_["outputs"].push_back(path.string()); }

  fs::path path() const { return dir_ / "run_manifest.json"; }

  void begin() {
    fs::create_directories(dir_);
    flush();
  }
  void finish(int status, const std::string& error = {}) {
    doc_["status"] = status == kOk ? "ok" : "failed";
    doc_["exit_code"] = status;
    if (!error.empty()) doc_["error"] = error;
    doc_["finished_at"] = utc_now();
    flush();
  }

 private:
  void flush() {
    std::ofstream out(path(), std::ios::trunc);
    out << doc_.dump(2) << "\n";
  }
  std::string command_;
  fs::path dir_;
  json doc_;
};

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kConfig;
  if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const LabelError*>(&e)) return kData;
  if (dynamic_cast<const NumericError*>(&e) || dynamic_cast<const DeterminismError*>(&e)) {
    return kNumeric;
  }
  if (dynamic_cast<const nlohmann::json::exception*>(&e)) return kData;
  return kOther;
}

// Runs `body` with a manifest in `dir`; errors become exit codes.
int run(const std::string& command, const fs::path& dir,
        const std::function<int(RunManifest&)>& body) {
  std::optional<RunManifest> manifest;
  try {
    manifest.emplace(command, dir);
    manifest->begin();
    const int status = body(*manifest);
    manifest->finish(status);
    return status;
  } catch (const std::exception& e) {
    const int status = exit_code_for(e);
    std::cerr << "error: " << e.what() << "\n";
    if (manifest) {
      try {
        manifest->finish(status, e.what());
      } catch (...) {
      }
    }
    return status;
  }
}

struct ConfigFlags {
  std::string config_file;
  std::string preset = "desk";
  std::vector<std::string> sets;
  std::string task, fusion, branches, msd, modality;
  std::optional<std::size_t> epochs, batch;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key = value config file");
    app->add_option("--preset", preset, "desk, full or full_low_lr")
        ->check(CLI::IsMember({"desk", "full", "full_low_lr"}));
    app->add_option("--set", sets, "override, key=value (repeatable)");
    app->add_option("--task", task, "sentiment, emotion, desire or binary_desire");
    app->add_option("--fusion", fusion, "early or late");
    app->add_option("--branches", branches, "both, vilt_only or vault_only");
    app->add_option("--msd", msd, "on or off");
    app->add_option("--modality", modality, "both, text_only or image_only");
    app->add_option("--epochs", epochs);
    app->add_option("--batch", batch);
    app->add_option("--seed", seed);
    app->add_option("--lr", lr);
  }

  // Preset for the task, then the config file, then --set, then flags.
  TrainConfig resolve() const {
    Task task_hint = Task::kSentiment;
    if (!task.empty()) {
      task_hint = parse_task(task);
    } else if (!config_file.empty()) {
      task_hint = TrainConfig::from_file(config_file).task;
    }
    TrainConfig c = preset == "full"          ? full_scale_preset(task_hint)
                    : preset == "full_low_lr" ? full_scale_low_lr_preset(task_hint)
                                              : desk_preset(task_hint);
    if (!config_file.empty()) c = TrainConfig::from_file(config_file, c);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      c.set(s.substr(0, eq), s.substr(eq + 1));
    }
    if (!task.empty()) c.set("task", task);
    if (!fusion.empty()) c.set("model.fusion", fusion);
    if (!branches.empty()) c.set("model.branches", branches);
    if (!msd.empty()) c.set("head.msd", msd);
    if (!modality.empty()) c.set("model.modality", modality);
    if (epochs) c.epochs = *epochs;
    if (batch) c.train_batch = *batch;
    if (seed) c.seed = *seed;
    if (lr) c.learning_rate = *lr;
    c.validate();
    return c;
  }
};

void record_dataset(RunManifest& m, const fs::path& data) {
  for (auto split : kSplitNames) m.input(split_file(data, split));
  m.input(data / "manifest.json");
}

std::string metrics_line(const MetricsReport& r) {
  return "P " + percent(r.macro_precision) + "  R " + percent(r.macro_recall) + "  F1 " +
         percent(r.macro_f1) + "  Acc " + percent(r.accuracy);
}

std::string metrics_text(const MetricsReport& r, Task task) {
  const auto& labels = LabelVocabulary::for_task(task);
  std::ostringstream out;
  out << "macro " << metrics_line(r) << "\n";
  out << "examples " << r.count << "\n";
  for (std::size_t c = 0; c < r.classes; ++c) {
    out << labels.name(c) << "  P " << percent(r.precision[c]) << "  R "
        << percent(r.recall[c]) << "  F1 " << percent(r.f1[c]) << "\n";
  }
  out << "confusion (rows gold, columns predicted)\n";
  for (const auto& row : r.confusion) {
    for (std::size_t p = 0; p < row.size(); ++p) out << (p ? " " : "") << row[p];
    out << "\n";
  }
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-branch multimodal transformer classifier"};
  app.require_subcommand(1);

  // gen-data
  SyntheticSpec spec;
  std::string gen_task, gen_out, gen_balance;
  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset");
  gen->add_option("--task", gen_task, "label task")->required();
  gen->add_option("--n-train", spec.n_train);
  gen->add_option("--n-val", spec.n_val);
  gen->add_option("--n-test", spec.n_test);
  gen->add_option("--seed", spec.seed);
  gen->add_option("--noise-rate", spec.noise_rate);
  gen->add_option("--balance", gen_balance, "comma-separated class weights");
  gen->add_option("--image-size", spec.image_size);
  gen->add_option("--out", gen_out, "output directory");

  // import-msed
  std::string csv_path, import_out;
  auto* imp = app.add_subcommand("import-msed", "convert an MSED CSV split");
  imp->add_option("--csv", csv_path)->required();
  imp->add_option("--out", import_out, "output record file")->required();

  // train
  ConfigFlags train_flags;
  std::string train_data, train_out;
  auto* trn = app.add_subcommand("train", "train and evaluate on test");
  trn->add_option("--data", train_data, "dataset directory")->required();
  trn->add_option("--out", train_out);
  train_flags.attach(trn);

  // eval
  std::string eval_ckpt, eval_data, eval_split = "test", eval_out;
  auto* evl = app.add_subcommand("eval", "evaluate a checkpoint");
  evl->add_option("--checkpoint", eval_ckpt)->required();
  evl->add_option("--data", eval_data, "dataset directory")->required();
  evl->add_option("--split", eval_split)->check(CLI::IsMember({"train", "val", "test"}));
  evl->add_option("--out", eval_out);

  // ablate
  ConfigFlags ablate_flags;
  std::string ablate_data, ablate_out;
  auto* abl = app.add_subcommand("ablate", "fusion x msd x branch grid");
  abl->add_option("--data", ablate_data)->required();
  abl->add_option("--out", ablate_out);
  ablate_flags.attach(abl);

  // sweep
  ConfigFlags sweep_flags;
  std::string sweep_data, sweep_out;
  std::size_t budget = 0;
  std::vector<std::string> axes;
  auto* swp = app.add_subcommand("sweep", "hyperparameter grid search");
  swp->add_option("--data", sweep_data)->required();
  swp->add_option("--budget", budget)->required();
  swp->add_option("--axis", axes, "key=v1|v2|... (repeatable; default reference space)");
  swp->add_option("--out", sweep_out);
  sweep_flags.attach(swp);

  // gradcheck
  ConfigFlags gc_flags;
  GradCheckOptions gc_opts;
  gc_opts.samples = 25;
  std::size_t gc_seeds = 1;
  std::string gc_dropout = "disabled", gc_out;
  auto* gck = app.add_subcommand("gradcheck", "finite-difference check of the model");
  gck->add_option("--samples", gc_opts.samples);
  gck->add_option("--tol", gc_opts.tolerance);
  gck->add_option("--step", gc_opts.h, "finite-difference step");
  gck->add_option("--runs", gc_seeds, "seeds seed, seed+1, ...");
  gck->add_option("--dropout", gc_dropout)->check(CLI::IsMember({"disabled", "frozen"}));
  gck->add_option("--out", gc_out);
  gc_flags.attach(gck);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  const fs::path root = output_root();

  if (*gen) {
    fs::path dir;
    try {
      spec.task = parse_task(gen_task);
    } catch (const ConfigError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kConfig;
    }
    dir = gen_out.empty() ? root / ("data-" + gen_task + "-" + std::to_string(spec.seed))
                          : fs::path(gen_out);
    return run("gen-data", dir, [&](RunManifest& m) {
      std::stringstream weights(gen_balance);
      for (std::string w; std::getline(weights, w, ',');) {
        try {
          spec.class_balance.push_back(std::stod(w));
        } catch (const std::exception&) {
          throw ConfigError("invalid class weight '" + w + "'");
        }
      }
      m.set("spec", {{"task", gen_task},
                     {"n_train", spec.n_train},
                     {"n_val", spec.n_val},
                     {"n_test", spec.n_test},
                     {"seed", spec.seed},
                     {"noise_rate", spec.noise_rate},
                     {"class_balance", spec.class_balance},
                     {"image_size", spec.image_size}});
      m.set("seed", spec.seed);
      const auto summary = generate_synthetic(spec, dir);
      for (auto split : kSplitNames) m.output(split_file(dir, split));
      m.output(summary.manifest);
      std::cout << summary.manifest.string() << "\n";
      return kOk;
    });
  }

  if (*imp) {
    const fs::path out(import_out);
    return run("import-msed", out.parent_path().empty() ? fs::path(".") : out.parent_path(),
               [&](RunManifest& m) {
                 m.input(csv_path);
                 const std::size_t n = import_msed_csv(csv_path, out);
                 m.output(out);
                 m.set("records", n);
                 std::cout << n << " records -> " << out.string() << "\n";
                 return kOk;
               });
  }

  if (*trn) {
    const fs::path dir = train_out.empty() ? root / "train" : fs::path(train_out);
    return run("train", dir, [&](RunManifest& m) {
      const TrainConfig config = train_flags.resolve();
      m.set_config(config);
      if (config.flagged_combination()) m.set("note", "late fusion with multi-sample dropout");
      record_dataset(m, train_data);
      if (!train_flags.config_file.empty()) m.input(train_flags.config_file);
      write_text(dir / "config.txt", config.to_text());
      m.output(dir / "config.txt");

      const auto data = load_splits(train_data, config.task);
      std::ofstream log(dir / "epochs.jsonl", std::ios::trunc);
      auto result = train(config, data, [&](const EpochLog& e) {
        log << e.to_json() << "\n" << std::flush;
        std::cout << "epoch " << e.epoch << "  train_loss " << e.train_loss << "  val_loss "
                  << e.val_loss << "  val_F1 " << percent(e.val_macro_f1)
                  << (e.best ? "  *" : "") << "\n";
      });
      m.output(dir / "epochs.jsonl");
      save_checkpoint(dir / "checkpoint.bin", result.best);
      m.output(dir / "checkpoint.bin");

      const MetricsReport test = evaluate(*result.model, data.test, data.root);
      write_text(dir / "test_metrics.json", metrics_to_json(test) + "\n");
      write_text(dir / "test_metrics.txt", metrics_text(test, config.task));
      m.output(dir / "test_metrics.json");
      m.output(dir / "test_metrics.txt");
      m.set("best_epoch", result.best.epoch);
      std::cout << "best epoch " << result.best.epoch << "\n";
      std::cout << "test " << metrics_line(test) << "\n";
      return kOk;
    });
  }

  if (*evl) {
    const fs::path dir = eval_out.empty() ? fs::path(eval_ckpt).parent_path() / ("eval-" + eval_split)
                                          : fs::path(eval_out);
    return run("eval", dir, [&](RunManifest& m) {
      m.input(eval_ckpt);
      const Checkpoint ckpt = load_checkpoint(eval_ckpt);
      m.set_config(ckpt.config);
      const fs::path split = split_file(eval_data, eval_split);
      m.input(split);
      const auto examples = load_dataset(split, ckpt.config.task);
      const MetricsReport r = evaluate(ckpt, examples, eval_data);
      write_text(dir / "metrics.json", metrics_to_json(r) + "\n");
      write_text(dir / "metrics.txt", metrics_text(r, ckpt.config.task));
      m.output(dir / "metrics.json");
      m.output(dir / "metrics.txt");
      std::cout << eval_split << " " << metrics_line(r) << "\n";
      return kOk;
    });
  }

  if (*abl) {
    const fs::path dir = ablate_out.empty() ? root / "ablate" : fs::path(ablate_out);
    return run("ablate", dir, [&](RunManifest& m) {
      const TrainConfig config = ablate_flags.resolve();
      m.set_config(config);
      record_dataset(m, ablate_data);
      const auto report = ablate(config, load_splits(ablate_data, config.task));
      write_text(dir / "ablation.txt", report.table());
      write_text(dir / "ablation.jsonl", report.to_jsonl());
      m.output(dir / "ablation.txt");
      m.output(dir / "ablation.jsonl");
      std::cout << report.table();
      return kOk;
    });
  }

  if (*swp) {
    const fs::path dir = sweep_out.empty() ? root / "sweep" : fs::path(sweep_out);
    return run("sweep", dir, [&](RunManifest& m) {
      const TrainConfig config = sweep_flags.resolve();
      m.set_config(config);
      record_dataset(m, sweep_data);
      SweepSpace space;
      for (const auto& axis : axes) {
        const auto eq = axis.find('=');
        if (eq == std::string::npos) throw ConfigError("--axis expects key=v1|v2, got '" + axis + "'");
        std::vector<std::string> values;
        std::stringstream ss(axis.substr(eq + 1));
        for (std::string v; std::getline(ss, v, '|');) values.push_back(v);
        space.emplace_back(axis.substr(0, eq), values);
      }
      if (space.empty()) space = reference_sweep_space();
      const auto report = sweep(space, budget, config, load_splits(sweep_data, config.task));
      std::string jsonl;
      for (std::size_t r = 0; r < report.rows.size(); ++r) {
        json row;
        row["rank"] = r + 1;
        row["point"] = report.rows[r].index;
        for (const auto& [k, v] : report.rows[r].overrides) row["overrides"][k] = v;
        row["val_loss"] = report.rows[r].val_loss;
        row["val_macro_f1"] = report.rows[r].val_macro_f1;
        row["test_macro_f1"] = report.rows[r].test_macro_f1;
        jsonl += row.dump() + "\n";
      }
      write_text(dir / "sweep.txt", report.table());
      write_text(dir / "sweep.jsonl", jsonl);
      m.output(dir / "sweep.txt");
      m.output(dir / "sweep.jsonl");
      m.set("grid_size", report.grid_size);
      m.set("trained", report.rows.size());
      std::cout << report.table();
      return kOk;
    });
  }

  if (*gck) {
    const fs::path dir = gc_out.empty() ? root / "gradcheck" : fs::path(gc_out);
    return run("gradcheck", dir, [&](RunManifest& m) {
      const TrainConfig config = gc_flags.resolve();
      m.set_config(config);
      const CheckDropout mode =
          gc_dropout == "frozen" ? CheckDropout::kFrozen : CheckDropout::kDisabled;
      bool passed = true;
      std::string jsonl;
      for (std::size_t i = 0; i < gc_seeds; ++i) {
        const std::uint64_t seed = config.seed + i;
        const auto report = end_to_end_grad_check(config, seed, gc_opts, mode);
        passed = passed && report.passed;
        for (const auto& e : report.entries) {
          json row{{"seed", seed},
                   {"parameter", e.name},
                   {"index", e.index},
                   {"analytic", e.analytic},
                   {"numeric", e.numeric},
                   {"relative_error", e.relative_error}};
          jsonl += row.dump() + "\n";
        }
        char line[160];
        std::snprintf(line, sizeof line, "seed %llu  entries %zu  max %.3e  mean %.3e  %s",
                      static_cast<unsigned long long>(seed), report.entries.size(),
                      report.max_relative_error, report.mean_relative_error,
                      report.passed ? "pass" : "FAIL");
        std::cout << line << "\n";
      }
      write_text(dir / "gradcheck.jsonl", jsonl);
      m.output(dir / "gradcheck.jsonl");
      m.set("passed", passed);
      return passed ? kOk : kNumeric;
    });
  }
  return kUsage;
}
