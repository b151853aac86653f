// SPDX-License-Identifier: Apache-2.0
//
// cfmq — precode-and-compress fronthaul quantization for cell-free massive MIMO
// Copyright (C) 2026 the cfmq authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>

namespace cfmq {

/// Deterministic xoshiro256++ generator. All stochastic operations in the
/// library take an explicit Rng; there is no global generator, and the output
/// stream is identical across platforms and compilers.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) { reseed(seed); }

    void reseed(std::uint64_t seed);

    std::uint64_t next_u64();

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

    /// Standard normal via Box-Muller (no state carried between calls).
    double normal();

    /// Circularly-symmetric complex Gaussian CN(0, 1).
    std::complex<double> cnormal();

    /// Derive an independent substream from a master seed and a path of
    /// counters. Streams with distinct paths are statistically independent,
    /// so work can be parallelized without losing determinism.
    static Rng stream(std::uint64_t master, std::initializer_list<std::uint64_t> path);

  private:
    std::uint64_t state_[4];
};

/// SplitMix64 mixing step, also used for stream derivation.
std::uint64_t splitmix64(std::uint64_t& x);

} // namespace cfmq
