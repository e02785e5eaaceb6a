#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace mmtf {

// 64-bit FNV-1a; stable across platforms, used to derive stream seeds and
// file checksums.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

// Deterministic random stream identified by (seed, name). Two streams with the
// same seed and name produce identical sequences; different names decorrelate.
class RandomStream {
 public:
  RandomStream() : RandomStream(0, "default") {}
  RandomStream(std::uint64_t seed, std::string_view name);

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double normal(double mean, double stddev);
  // Uniform integer in [0, n).
  std::size_t below(std::size_t n);

  void reset();
  const std::string& name() const { return name_; }
  std::uint64_t seed() const { return seed_; }

  // Engine state as text, for checkpoints.
  std::string state() const;
  void restore(const std::string& state);

 private:
  std::uint64_t seed_;
  std::string name_;
  std::mt19937_64 engine_;
};

}  // namespace mmtf
