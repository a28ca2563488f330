#ifndef PRUNEKIT_UTIL_H_
#define PRUNEKIT_UTIL_H_

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace prunekit {

// 64-bit FNV-1a. Stable across platforms; used for fold assignment,
// feature-space fingerprints and config hashes.
uint64_t Fnv1a64(std::string_view data, uint64_t seed = 0xcbf29ce484222325ULL);

std::string HexDigest(uint64_t value);

// SplitMix64 finalizer; derives independent child seeds from a base seed.
uint64_t MixSeed(uint64_t base, uint64_t stream);

// Uniform double in [0, 1) from one 64-bit draw (53 mantissa bits), so
// results do not depend on the standard library's distribution classes.
template <typename Engine>
double UniformUnit(Engine &engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

std::string ToLower(std::string_view s);
std::vector<std::string> SplitWhitespace(std::string_view s);
std::vector<std::string> Split(std::string_view s, char delim);
std::string_view Trim(std::string_view s);

// Runs body(i) for i in [0, n) on up to `threads` workers (0 = hardware
// concurrency). Each index is visited exactly once; the first exception
// thrown by any worker is rethrown on the calling thread.
void ParallelFor(size_t n, const std::function<void(size_t)> &body,
                 unsigned threads = 0);

// Mean and population standard deviation.
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  size_t n = 0;
};
MeanStd Summarize(const std::vector<double> &values);

}  // namespace prunekit

#endif  // PRUNEKIT_UTIL_H_
