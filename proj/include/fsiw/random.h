/*
 * Copyright 2026 The FSIW Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FSIW_RANDOM_H_
#define FSIW_RANDOM_H_

#include <cstdint>
#include <random>

namespace fsiw {

inline std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Random engine with platform-independent output.
//
// std::mt19937_64 is fully specified by the standard, but the <random>
// distributions are not, so every draw below is derived from raw 64-bit
// words.
class RandomEngine {
 public:
  explicit RandomEngine(std::uint64_t seed) : engine_(SplitMix64(seed)) {}

  // Independent substream keyed by (seed, stream).
  static RandomEngine Substream(std::uint64_t seed, std::uint64_t stream) {
    return RandomEngine(seed ^ SplitMix64(stream + 0x632be59bd9b4e019ULL));
  }

  std::uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1).
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1], safe for log().
  double UniformPositive() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). Lemire's multiply-shift reduction.
  std::uint64_t UniformInt(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  bool Bernoulli(double p) { return Uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fsiw

#endif  // FSIW_RANDOM_H_
