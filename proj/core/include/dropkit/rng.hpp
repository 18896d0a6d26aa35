#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace dropkit {

/// SplitMix64 finalizer, used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Portable random stream.
///
/// std::mt19937_64 has a fully specified output sequence, but the standard
/// distributions do not, so every draw here is built from raw engine output.
/// The same seed yields the same numbers with any conforming standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal via Box-Muller.
    double normal();
    /// Uniform integer on [0, n); n must be positive.
    std::size_t index(std::size_t n);
    /// Uniformly random permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n);

private:
    std::mt19937_64 engine_;
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace dropkit
