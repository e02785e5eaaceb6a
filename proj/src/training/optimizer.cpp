#include "mmtf/optimizer.hpp"

#include <cmath>

#include "mmtf/errors.hpp"

namespace mmtf {

Adam::Adam(const ModelParameters& params, AdamOptions options)
    : options_(options) {
  for (const auto& entry : params.entries()) {
    m_.emplace_back(entry.tensor.numel(), 0.0);
    v_.emplace_back(entry.tensor.numel(), 0.0);
  }
}

void Adam::step(ModelParameters& params) {
  const auto& entries = params.entries();
  if (entries.size() != m_.size()) {
    throw ContractError("optimizer built for " + std::to_string(m_.size()) +
                        " tensors, registry holds " + std::to_string(entries.size()));
  }
  for (const auto& entry : entries) {
    if (!entry.tensor.has_grad()) continue;
    for (double g : entry.tensor.grad()) {
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient in parameter '" + entry.name + "'");
      }
    }
  }

  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Tensor t = entries[i].tensor;
    if (!t.has_grad()) continue;
    const auto& g = t.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    double* w = t.mutable_data().data();
    for (std::size_t k = 0; k < g.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double mh = m[k] / c1;
      const double vh = v[k] / c2;
      w[k] -= options_.learning_rate * mh / (std::sqrt(vh) + options_.epsilon);
    }
  }
  params.zero_grad();
}

}  // namespace mmtf
