#pragma once

#include <array>
#include <cstdint>

#include "pift/model.hpp"

namespace pift {

using Philox4x32Counter = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

// Philox4x32 with 10 rounds.
Philox4x32Counter philox4x32(Philox4x32Counter ctr, Philox4x32Key key) noexcept;

// Stateless normal stream: each (path, slot, component) maps to a fixed draw.
// Slot 0 is the initial state, slot t+1 is the step-t noise.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed) noexcept : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  double normal(std::uint64_t path, std::uint32_t slot, std::uint32_t component) const noexcept;
  Vec normals(std::uint64_t path, std::uint32_t slot, int d) const;
  // Uniform on (0,1) with 53-bit resolution.
  double uniform(std::uint64_t path, std::uint32_t slot, std::uint32_t index) const noexcept;

 private:
  std::uint64_t seed_;
};

}  // namespace pift
