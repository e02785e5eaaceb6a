#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "mmtf/random.hpp"
#include "mmtf/tensor.hpp"

namespace testutil {

inline mmtf::Tensor random_tensor(mmtf::Shape shape, std::uint64_t seed,
                                  bool requires_grad = false, double scale = 1.0) {
  mmtf::RandomStream rng(seed, "test");
  std::vector<double> v(mmtf::shape_numel(shape));
  for (auto& x : v) x = scale * (2.0 * rng.uniform() - 1.0);
  return mmtf::Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("mmtf_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<double> values(const mmtf::Tensor& t) {
  return {t.data().begin(), t.data().end()};
}

}  // namespace testutil
