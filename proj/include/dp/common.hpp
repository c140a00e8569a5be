#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dp {

// ---------------------------------------------------------------------------
// Error hierarchy. Every named failure mode gets its own type so callers can
// catch precisely; all derive from dp::Error (std::runtime_error).
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define DP_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                   \
   public:                                                      \
    explicit Name(const std::string& what) : Error(what) {}     \
  }

DP_DEFINE_ERROR(DimensionMismatch);
DP_DEFINE_ERROR(NotPsd);
DP_DEFINE_ERROR(DegenerateSpectrum);
DP_DEFINE_ERROR(NonConvergence);
DP_DEFINE_ERROR(InvalidParams);
DP_DEFINE_ERROR(InvalidSpec);
DP_DEFINE_ERROR(IndexOutOfRange);
DP_DEFINE_ERROR(InsufficientPublicData);
DP_DEFINE_ERROR(GapViolation);
DP_DEFINE_ERROR(UnderNoised);
DP_DEFINE_ERROR(EmptyHistory);
DP_DEFINE_ERROR(NonPositiveValue);
DP_DEFINE_ERROR(DegenerateStep);
DP_DEFINE_ERROR(ConfigError);
DP_DEFINE_ERROR(IoError);

#undef DP_DEFINE_ERROR

// ---------------------------------------------------------------------------
// Rng: seeded, splittable random source. All sampling in the library goes
// through an explicit Rng owned by the caller; there is no global randomness.
//
// The generator is mt19937_64 with hand-rolled uniform/normal transforms so
// that streams are identical across standard-library implementations (the
// std distributions are implementation-defined).
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(detail::splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  // Domain-separated child stream; independent of this stream's position.
  Rng fork(std::string_view label) const {
    return Rng(detail::splitmix64(seed_ ^ detail::fnv1a(label)));
  }
  Rng fork(std::string_view label, std::uint64_t index) const {
    return Rng(detail::splitmix64(detail::splitmix64(seed_ ^ detail::fnv1a(label)) + index));
  }

  std::uint64_t next_u64() {
    // xorshift-multiplied splitmix stream: simple, fast, portable.
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive integer range.
  int uniform_int(int lo, int hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  // Standard normal via Box-Muller; two uniforms per draw, no cached state.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

}  // namespace dp
