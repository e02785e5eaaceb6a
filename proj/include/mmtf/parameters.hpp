#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mmtf/grad_check.hpp"
#include "mmtf/tensor.hpp"

namespace mmtf {

// Registry of every trainable tensor of a model, in registration order.
// Names are unique; once sealed, the set of tensors can no longer change.
class ModelParameters {
 public:
  // Registers `tensor` as trainable and returns the same handle.
  Tensor add(const std::string& name, Tensor tensor);

  const std::vector<NamedTensor>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  bool contains(std::string_view name) const;
  const Tensor& at(std::string_view name) const;

  // Allocates zeroed grads on every tensor, so unreachable parameters read 0.
  void zero_grad();
  void seal() { sealed_ = true; }
  bool sealed() const { return sealed_; }

  // Order-sensitive digest of all parameter values.
  std::uint64_t checksum() const;
  // Digest restricted to names starting with `prefix`.
  std::uint64_t checksum(std::string_view prefix) const;

 private:
  std::vector<NamedTensor> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  bool sealed_ = false;
};

}  // namespace mmtf
