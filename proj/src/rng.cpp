#include "avi/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace avi {

namespace {

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kStreamSalt = 0xD1B54A32D192ED03ull;
constexpr std::uint64_t kSplitSalt = 0xA0761D6478BD642Full;

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id),
      key_(mix64(seed + kGolden) ^ mix64(stream_id + kStreamSalt)) {}

std::uint64_t RngStream::next_u64() {
    return mix64(key_ + (counter_++) * kGolden);
}

double RngStream::uniform01() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double RngStream::normal() {
    const double u1 = uniform01();
    const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

RngStream RngStream::split(std::uint64_t index) const {
    return RngStream(seed_, mix64(stream_id_ ^ mix64(index + kSplitSalt)));
}

std::vector<double> sample_std_normal(RngStream& rng, int d) {
    if (d < 1) throw std::invalid_argument("sample_std_normal: d must be >= 1");
    std::vector<double> out(static_cast<std::size_t>(d));
    for (auto& x : out) x = rng.normal();
    return out;
}

std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    return mix64(a + kGolden * (b + 1));
}

}  // namespace avi
