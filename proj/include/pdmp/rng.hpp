#pragma once

#include <cstdint>
#include <vector>

namespace pdmp {

// Splittable counter-based generator: the stream for replication `index`
// under `master` is a pure function of (master, index), so replications can
// run on any thread layout with bitwise-identical draws.  Core mixer is
// splitmix64 (Steele-Lea-Vigna); streams are decorrelated by hashing the
// (master, index) pair into the initial state.
class RngStream {
  public:
    RngStream(std::uint64_t master, std::uint64_t index) {
        state_ = mix(master ^ mix(index + 0x9E3779B97F4A7C15ULL));
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    // Uniform on the open interval (0, 1): ((x >> 11) + 0.5) * 2^-53.
    double next_double() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    std::uint64_t state_ = 0;
};

// Pairwise summation with a fixed binary-tree shape (split at the midpoint);
// the result depends only on the element order, never on thread scheduling.
double pairwise_sum(const double* v, std::size_t n);
inline double pairwise_sum(const std::vector<double>& v) {
    return pairwise_sum(v.data(), v.size());
}

} // namespace pdmp
