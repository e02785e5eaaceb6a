#include "mmtf/parameters.hpp"

#include "mmtf/errors.hpp"
#include "mmtf/random.hpp"

namespace mmtf {

Tensor ModelParameters::add(const std::string& name, Tensor tensor) {
  if (sealed_) {
    throw ContractError("cannot register '" + name +
                        "': parameter set is sealed");
  }
  if (index_.count(name)) {
    throw ContractError("parameter '" + name + "' registered twice");
  }
  for (const auto& e : entries_) {
    if (e.tensor.same_storage(tensor)) {
      throw ContractError("parameter '" + name + "' aliases '" + e.name + "'");
    }
  }
  tensor.set_requires_grad(true);
  index_.emplace(name, entries_.size());
  entries_.push_back({name, tensor});
  return tensor;
}

std::size_t ModelParameters::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

bool ModelParameters::contains(std::string_view name) const {
  return index_.count(std::string(name)) > 0;
}

const Tensor& ModelParameters::at(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) {
    throw ContractError("unknown parameter '" + std::string(name) + "'");
  }
  return entries_[it->second].tensor;
}

void ModelParameters::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

std::uint64_t ModelParameters::checksum() const { return checksum(""); }

std::uint64_t ModelParameters::checksum(std::string_view prefix) const {
  std::uint64_t h = fnv1a64("");
  for (const auto& e : entries_) {
    if (e.name.compare(0, prefix.size(), prefix) != 0) continue;
    h = fnv1a64(e.name, h);
    const auto values = e.tensor.data();
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(values.data()),
                                 values.size() * sizeof(double)),
                h);
  }
  return h;
}

}  // namespace mmtf
