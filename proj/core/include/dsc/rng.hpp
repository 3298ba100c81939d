#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace dsc {

// Deterministic random stream. Wraps std::mt19937_64 but maps raw engine
// output to values itself, so results are identical across standard
// libraries (std::uniform_real_distribution is implementation-defined).
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), engine_(mix(seed)) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0,1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0,n). Fixed-point multiply keeps the draw count at
  // exactly one engine step per call.
  int64_t uniform_int(int64_t n) {
    return static_cast<int64_t>(
        (static_cast<unsigned __int128>(next_u64()) *
         static_cast<unsigned __int128>(n)) >> 64);
  }

  // Fisher-Yates, one uniform_int per element.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i) {
      const int64_t j = uniform_int(i + 1);
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
    }
  }

  std::vector<int64_t> permutation(int64_t n) {
    std::vector<int64_t> p(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) p[static_cast<size_t>(i)] = i;
    shuffle(p);
    return p;
  }

  // Derives an independent stream from the *construction* seed, regardless
  // of how much this stream has been consumed.
  Rng fork(uint64_t stream) const { return Rng(mix(seed_ ^ mix(stream))); }

  Rng fork(std::string_view label) const {
    uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (char c : label) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    return fork(h);
  }

  uint64_t seed() const { return seed_; }

 private:
  // splitmix64 finalizer; decorrelates nearby seeds.
  static uint64_t mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace dsc
