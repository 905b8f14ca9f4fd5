#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace skipthink {

// Error carries a short machine-parsable kind ("io", "data", "config",
// "network", "auth", "protocol", "exists", "contract", "numeric") plus a
// human-readable message.  The CLI maps kinds to exit codes and prints a
// single "error: <kind>: <msg>" line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(msg), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

[[noreturn]] inline void fail(const std::string& kind, const std::string& msg) {
  throw Error(kind, msg);
}

// FNV-1a 64-bit.  Used for content hashes on artifacts, seed-stable dataset
// splits and plan fingerprints.  Not cryptographic; collisions are irrelevant
// at these scales and determinism is what matters.
inline uint64_t fnv1a64(const void* data, size_t n,
                        uint64_t h = 0xcbf29ce484222325ull) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a64(std::string_view s,
                        uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), h);
}

// exact match for string literals; without it fnv1a64("lit", h) would prefer
// the (const void*, size_t) overload and read h bytes
inline uint64_t fnv1a64(const char* s, uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a64(std::string_view(s), h);
}

inline uint64_t fnv1a64_u64(uint64_t x, uint64_t h = 0xcbf29ce484222325ull) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
  return fnv1a64(b, 8, h);
}

std::string to_hex(uint64_t v);

// Deterministic RNG wrapper.  mt19937_64 output is pinned by the standard;
// the integer/real/normal mappings below are written out by hand so streams
// are identical across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t u64() { return eng_(); }

  // uniform in [0, n); modulo mapping, bias negligible for n << 2^64
  uint64_t below(uint64_t n) { return eng_() % n; }

  int index(size_t n) { return static_cast<int>(below(n)); }

  // uniform in [0, 1)
  double real() {
    return static_cast<double>(eng_() >> 11) * (1.0 / 9007199254740992.0);
  }

  // Box-Muller; one fresh pair per call, cosine branch only
  double normal() {
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = real();
    double u2 = real();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);
uint64_t hash_file(const std::string& path);

}  // namespace skipthink
