#pragma once

#include <cstdint>
#include <random>

namespace hitl {

// One generator per run. Every consumer draws through uniform(), so the number
// of draws per operation is the whole replay contract.
//
// uniform() maps the top 53 bits of a 64-bit Mersenne Twister output onto
// [0, 1). std::uniform_real_distribution is not used because its output is
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() {
    ++draws_;
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  std::uint64_t draws() const noexcept { return draws_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t draws_ = 0;
};

}  // namespace hitl
