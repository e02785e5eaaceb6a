#include "mmtf/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include "mmtf/errors.hpp"

namespace mmtf {

MetricsReport macro_metrics(const std::vector<std::size_t>& predictions,
                            const std::vector<std::size_t>& golds,
                            std::size_t classes) {
  if (predictions.size() != golds.size()) {
    throw ContractError("macro_metrics: " + std::to_string(predictions.size()) +
                        " predictions for " + std::to_string(golds.size()) +
                        " gold labels");
  }
  if (golds.empty()) throw ContractError("macro_metrics: no examples");
  if (classes == 0) throw ContractError("macro_metrics: zero classes");

  MetricsReport r;
  r.classes = classes;
  r.count = golds.size();
  r.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (golds[i] >= classes || predictions[i] >= classes) {
      throw LabelError("macro_metrics: label " +
                       std::to_string(std::max(golds[i], predictions[i])) +
                       " outside [0, " + std::to_string(classes) + ")");
    }
    ++r.confusion[golds[i]][predictions[i]];
    if (golds[i] == predictions[i]) ++correct;
  }

  r.precision.resize(classes);
  r.recall.resize(classes);
  r.f1.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t predicted = 0, actual = 0;
    for (std::size_t k = 0; k < classes; ++k) {
      predicted += r.confusion[k][c];
      actual += r.confusion[c][k];
    }
    const double tp = static_cast<double>(r.confusion[c][c]);
    const double p = predicted ? tp / static_cast<double>(predicted) : 0.0;
    const double rc = actual ? tp / static_cast<double>(actual) : 0.0;
    r.precision[c] = p;
    r.recall[c] = rc;
    r.f1[c] = (p + rc) > 0.0 ? 2.0 * p * rc / (p + rc) : 0.0;
    r.macro_precision += p;
    r.macro_recall += rc;
    r.macro_f1 += r.f1[c];
  }
  const double k = static_cast<double>(classes);
  r.macro_precision /= k;
  r.macro_recall /= k;
  r.macro_f1 /= k;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(golds.size());
  return r;
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", fraction * 100.0);
  return buf;
}

}  // namespace mmtf
