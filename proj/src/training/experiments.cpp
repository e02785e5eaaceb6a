#include "mmtf/experiments.hpp"

#include <algorithm>
#include <cstdio>

#include "mmtf/errors.hpp"
#include "mmtf/random.hpp"

namespace mmtf {

namespace {

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

// Left-aligned columns separated by two spaces.
std::string render(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& r : rows) {
    widths.resize(std::max(widths.size(), r.size()), 0);
    for (std::size_t i = 0; i < r.size(); ++i) widths[i] = std::max(widths[i], r[i].size());
  }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) {
      line += i + 1 < r.size() ? pad(r[i], widths[i] + 2) : r[i];
    }
    out += line + "\n";
  }
  return out;
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

SweepSpace reference_sweep_space() {
  return {
      {"train.batch", {"2", "4", "8", "16", "32"}},
      {"train.eval_batch", {"1", "2", "4", "8", "16"}},
      {"model.max_length", {"32", "40", "64", "128", "256", "512"}},
      {"train.learning_rate", {"1e-3", "1e-4", "1e-5", "5e-6"}},
      {"train.epochs", {"1", "2", "3", "4", "5", "6", "7", "8", "9", "10"}},
      {"head.d0_dropout", {"0.1", "0.2", "0.3", "0.4", "0.5", "0.6", "0.7", "0.8"}},
  };
}

std::size_t grid_size(const SweepSpace& space) {
  if (space.empty()) throw ContractError("sweep: empty search space");
  std::size_t n = 1;
  for (const auto& [key, values] : space) {
    if (values.empty()) throw ContractError("sweep: no candidates for '" + key + "'");
    n *= values.size();
  }
  return n;
}

SweepReport sweep(const SweepSpace& space, std::size_t budget,
                  const TrainConfig& base, const DatasetSplits& data) {
  if (budget == 0) throw ContractError("sweep: budget must be positive");
  SweepReport report;
  report.grid_size = grid_size(space);

  std::vector<std::size_t> picks(report.grid_size);
  for (std::size_t i = 0; i < picks.size(); ++i) picks[i] = i;
  if (budget < picks.size()) {
    RandomStream rng(base.seed, "sweep");
    for (std::size_t i = 0; i < budget; ++i) {
      std::swap(picks[i], picks[i + rng.below(picks.size() - i)]);
    }
    picks.resize(budget);
    std::sort(picks.begin(), picks.end());
  }

  for (std::size_t index : picks) {
    SweepRow row;
    row.index = index;
    row.config = base;
    std::size_t rest = index;
    for (std::size_t k = space.size(); k-- > 0;) {
      const auto& [key, values] = space[k];
      row.overrides.emplace_back(key, values[rest % values.size()]);
      rest /= values.size();
    }
    std::reverse(row.overrides.begin(), row.overrides.end());
    for (const auto& [key, value] : row.overrides) row.config.set(key, value);
    row.config.validate();

    auto result = train(row.config, data);
    const auto val = evaluate_encoded(*result.model,
                                      encode_examples(*result.model, data.val, data.root));
    row.val_macro_f1 = val.metrics.macro_f1;
    row.val_loss = val.loss;
    if (!data.test.empty()) {
      row.test_macro_f1 = evaluate(*result.model, data.test, data.root).macro_f1;
    }
    report.rows.push_back(std::move(row));
  }
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const SweepRow& a, const SweepRow& b) {
                     return a.val_macro_f1 > b.val_macro_f1;
                   });
  return report;
}

std::string SweepReport::table() const {
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> header = {"rank", "point"};
  if (!rows.empty()) {
    for (const auto& [key, value] : rows.front().overrides) header.push_back(key);
  }
  header.insert(header.end(), {"val_loss", "val_macro_f1", "test_macro_f1"});
  out.push_back(header);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::vector<std::string> line = {std::to_string(r + 1), std::to_string(rows[r].index)};
    for (const auto& [key, value] : rows[r].overrides) line.push_back(value);
    line.insert(line.end(), {fixed4(rows[r].val_loss), percent(rows[r].val_macro_f1),
                             percent(rows[r].test_macro_f1)});
    out.push_back(line);
  }
  return render(out);
}

AblationReport ablate(const TrainConfig& base, const DatasetSplits& data) {
  AblationReport report;
  for (Fusion fusion : {Fusion::kEarly, Fusion::kLate}) {
    for (bool msd : {true, false}) {
      for (Branches branches : {Branches::kBoth, Branches::kViltOnly, Branches::kVaultOnly}) {
        TrainConfig config = base;
        config.fusion = fusion;
        config.msd = msd;
        config.branches = branches;
        if (msd && config.msd_rates.empty()) config.msd_rates = kDefaultSampleRates;
        auto result = train(config, data);
        AblationCell cell;
        cell.fusion = fusion;
        cell.msd = msd;
        cell.branches = branches;
        cell.flagged = config.flagged_combination();
        cell.parameter_count = result.model->parameters().scalar_count();
        for (const auto& log : result.log) {
          if (log.epoch == result.best.epoch) cell.val_macro_f1 = log.val_macro_f1;
        }
        cell.test = evaluate(*result.model, data.test, data.root);
        report.cells.push_back(std::move(cell));
      }
    }
  }
  return report;
}

const AblationCell& AblationReport::cell(Fusion fusion, bool msd,
                                         Branches branches) const {
  for (const auto& c : cells) {
    if (c.fusion == fusion && c.msd == msd && c.branches == branches) return c;
  }
  throw ContractError("ablation report has no such cell");
}

std::string AblationReport::table() const {
  std::vector<std::vector<std::string>> out = {
      {"fusion", "msd", "branches", "params", "P", "R", "F1", "Acc", "val_F1", "note"}};
  for (const auto& c : cells) {
    out.push_back({std::string(fusion_name(c.fusion)), c.msd ? "on" : "off",
                   std::string(branches_name(c.branches)),
                   std::to_string(c.parameter_count), percent(c.test.macro_precision),
                   percent(c.test.macro_recall), percent(c.test.macro_f1),
                   percent(c.test.accuracy), percent(c.val_macro_f1),
                   c.flagged ? "late+msd" : "-"});
  }
  return render(out);
}

std::string AblationReport::to_jsonl() const {
  std::string out;
  for (const auto& c : cells) {
    out += "{\"fusion\":\"" + std::string(fusion_name(c.fusion)) + "\",\"msd\":" +
           (c.msd ? "true" : "false") + ",\"branches\":\"" +
           std::string(branches_name(c.branches)) + "\",\"flagged\":" +
           (c.flagged ? "true" : "false") +
           ",\"parameters\":" + std::to_string(c.parameter_count) +
           ",\"test\":" + metrics_to_json(c.test) + "}\n";
  }
  return out;
}

}  // namespace mmtf
