#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace mmtf {

struct MetricsReport {
  std::size_t classes = 0;
  std::size_t count = 0;
  std::vector<double> precision;  // per class
  std::vector<double> recall;
  std::vector<double> f1;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  // confusion[gold][predicted]
  std::vector<std::vector<std::size_t>> confusion;

  bool operator==(const MetricsReport&) const = default;
};

// Per-class precision/recall/F1 with 0 for every zero denominator, macro
// averages taken over all `classes` (including classes that never occur),
// and exact-match accuracy. LabelError when an index is >= classes.
MetricsReport macro_metrics(const std::vector<std::size_t>& predictions,
                            const std::vector<std::size_t>& golds,
                            std::size_t classes);

// Two-decimal percentage, e.g. 0.88444 -> "88.44".
std::string percent(double fraction);

}  // namespace mmtf
