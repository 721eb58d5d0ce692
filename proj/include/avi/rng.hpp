#pragma once

#include <cstdint>
#include <vector>

namespace avi {

/// Counter-based pseudo-random stream. Every output is a hash of
/// (seed, stream_id, counter), so a stream is a value: copies replay the same
/// sequence, `split` derives statistically independent child streams without
/// shared state, and results are reproducible under any thread schedule.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    std::uint64_t next_u64();

    /// Uniform draw in (0, 1].
    double uniform01();

    /// One standard-normal draw (Box-Muller); consumes exactly two counters.
    double normal();

    /// Independent child stream identified by (seed, stream_id, index).
    /// Depends only on the stream identity, not on how far it has advanced.
    RngStream split(std::uint64_t index) const;

    void skip(std::uint64_t n_counters) { counter_ += n_counters; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// d independent standard-normal draws; advances the stream by 2d counters.
std::vector<double> sample_std_normal(RngStream& rng, int d);

/// 64-bit mix used for deriving per-run seeds from grid coordinates.
std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b);

}  // namespace avi
