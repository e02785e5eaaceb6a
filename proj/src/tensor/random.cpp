#include "mmtf/random.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "mmtf/errors.hpp"

namespace mmtf {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed, std::string_view name)
    : seed_(seed), name_(name), engine_(splitmix64(seed ^ fnv1a64(name))) {}

double RandomStream::normal(double mean, double stddev) {
  // Box-Muller; avoids the implementation-defined std::normal_distribution.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double z = std::sqrt(-2.0 * std::log(u1)) *
                   std::cos(2.0 * std::numbers::pi * u2);
  return mean + stddev * z;
}

std::size_t RandomStream::below(std::size_t n) {
  if (n == 0) throw ContractError("RandomStream::below(0)");
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return static_cast<std::size_t>(x % n);
}

void RandomStream::reset() { engine_.seed(splitmix64(seed_ ^ fnv1a64(name_))); }

std::string RandomStream::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void RandomStream::restore(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  if (!is) throw FormatError("corrupt random stream state for " + name_);
}

}  // namespace mmtf
