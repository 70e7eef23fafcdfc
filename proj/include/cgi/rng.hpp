#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace cgi {

// splitmix64 finalizer; the basis for all seed derivation.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash64(std::uint64_t seed, std::uint64_t v) {
  return mix64(seed ^ mix64(v));
}

inline std::uint64_t hash64(std::uint64_t seed, std::string_view s) {
  std::uint64_t h = seed ^ 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h = mix64(h ^ c);
  }
  return h;
}

inline std::uint64_t hash64(std::uint64_t seed, std::uint64_t a, std::string_view b) {
  return hash64(hash64(seed, a), b);
}

// Deterministic PRNG with hand-rolled integer draws. The standard
// distributions are implementation-defined, so byte-stable outputs
// (task files, mixed datasets, logs) must not go through them.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x6a09e667f3bcc909ULL) {}

  std::uint64_t next() {
    state_ = mix64(state_);
    return state_;
  }

  // Uniform in [0, n) by rejection; n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~0ULL - ~0ULL % n;
    std::uint64_t r = next();
    while (r >= limit) {
      r = next();
    }
    return r % n;
  }

  // Bernoulli(p) with p in [0,1].
  bool chance(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return static_cast<double>(next() >> 11) * 0x1.0p-53 < p;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(v[i - 1], v[j]);
    }
  }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(below(v.size()))];
  }

 private:
  std::uint64_t state_;
};

}  // namespace cgi
