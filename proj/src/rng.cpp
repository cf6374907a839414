#include "pift/rng.hpp"

#include <cmath>
#include <numbers>

namespace pift {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline double to_unit(std::uint32_t a, std::uint32_t b) {
  const std::uint64_t x = (static_cast<std::uint64_t>(a) << 32) | b;
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

Philox4x32Counter block(std::uint64_t seed, std::uint64_t path, std::uint32_t slot, std::uint32_t j) {
  return philox4x32({static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32), slot, j},
                    {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
}

}  // namespace

Philox4x32Counter philox4x32(Philox4x32Counter c, Philox4x32Key k) noexcept {
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      k[0] += kW0;
      k[1] += kW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, c[0], hi0, lo0);
    mulhilo(kM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
  return c;
}

double NoiseStream::normal(std::uint64_t path, std::uint32_t slot, std::uint32_t component) const noexcept {
  const auto r = block(seed_, path, slot, component / 2);
  const double u1 = to_unit(r[0], r[1]);
  const double u2 = to_unit(r[2], r[3]);
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double th = 2.0 * std::numbers::pi * u2;
  return component % 2 == 0 ? rad * std::cos(th) : rad * std::sin(th);
}

Vec NoiseStream::normals(std::uint64_t path, std::uint32_t slot, int d) const {
  Vec w(d);
  for (int k = 0; k < d; ++k) w(k) = normal(path, slot, static_cast<std::uint32_t>(k));
  return w;
}

double NoiseStream::uniform(std::uint64_t path, std::uint32_t slot, std::uint32_t index) const noexcept {
  const auto r = block(seed_, path, slot, 0x80000000u | (index / 2));
  return index % 2 == 0 ? to_unit(r[0], r[1]) : to_unit(r[2], r[3]);
}

}  // namespace pift
