#ifndef USFGAN_COMMON_HPP
#define USFGAN_COMMON_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace usfgan {

// Raised on malformed inputs: bad files, shape mismatches, contract violations.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a computation produces NaN/Inf; carries the first offending node.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kTwoPi = 2.0 * kPi;

// Amplitude floor applied before every logarithm.
constexpr double kAmpFloor = 1e-8;

// SplitMix64. Used to derive independent RNG seeds from (seed, stream tags)
// so that every random draw in training is a pure function of the global
// seed plus its position, which makes checkpoint resume exact.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t seed, uint64_t stream, uint64_t index = 0) {
  return splitmix64(splitmix64(seed ^ 0x6a09e667f3bcc909ULL) ^
                    splitmix64(stream * 0x9e3779b97f4a7c15ULL + index));
}

}  // namespace usfgan

#endif  // USFGAN_COMMON_HPP
