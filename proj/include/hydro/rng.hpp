#pragma once

#include <cstdint>

namespace hydro {

std::uint64_t splitmix64_mix(std::uint64_t z);

// Counter-based stream: draw k of stream (seed, index) is
// mix(key + (k + 1) * golden) with key = mix(seed ^ mix(index + golden)),
// i.e. SplitMix64 keyed by the pair. Gaussians use Box-Muller with both
// outputs consumed in order.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t index);

  std::uint64_t next_u64();
  // Uniform on (0, 1).
  double uniform();
  double normal();
  std::uint64_t counter() const { return counter_; }

  static constexpr const char* kGaussianMethod = "box-muller";
  static constexpr const char* kGenerator = "splitmix64-counter";

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hydro
