#include "mlpbsde/sampling.hpp"

#include "mlpbsde/errors.hpp"

#include <boost/math/policies/policy.hpp>
#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <numbers>
#include <string>

namespace mlpbsde {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Two independent absorbers so a collision needs both 64-bit lanes to agree.
void absorb(std::array<std::uint64_t, 2>& d, std::uint64_t v) {
    d[0] = mix64(d[0] ^ v) + 0x9E3779B97F4A7C15ull;
    d[1] = mix64(d[1] + v * 0xD1B54A32D192ED03ull + 0x632BE59BD9B4E019ull);
}

using Policy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;

} // namespace

StreamKey::StreamKey(std::uint64_t seed) : seed_(seed) {
    digest_ = {mix64(seed ^ 0x243F6A8885A308D3ull), mix64(seed ^ 0x13198A2E03707344ull)};
}

StreamKey child_key(const StreamKey& key, int level, std::int64_t replica, int slot) {
    if (key.path_.size() >= kMaxStreamDepth) {
        throw Error("stream path exceeds " + std::to_string(kMaxStreamDepth) + " frames");
    }
    StreamKey out = key;
    out.path_.push_back({level, replica, slot});
    absorb(out.digest_, static_cast<std::uint64_t>(static_cast<std::int64_t>(level)));
    absorb(out.digest_, static_cast<std::uint64_t>(replica));
    absorb(out.digest_, static_cast<std::uint64_t>(static_cast<std::int64_t>(slot)));
    return out;
}

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) {
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += kPhiloxW0;
        k[1] += kPhiloxW1;
    }
    return c;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return mix64(mix64(seed + 0x9E3779B97F4A7C15ull) ^ (index * 0xD6E8FEB86659FD93ull + 1));
}

double normal_quantile(double u) {
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u, Policy{});
}

RandomStream::RandomStream(const StreamKey& key, std::uint64_t position)
    : position_(position) {
    const auto d = key.digest();
    key_ = {static_cast<std::uint32_t>(d[0]), static_cast<std::uint32_t>(d[0] >> 32)};
    counter_hi_ = d[1];
}

std::uint64_t RandomStream::next_bits() {
    const std::uint64_t block = position_ >> 1;
    if (block != cached_block_) {
        const auto out = philox4x32({static_cast<std::uint32_t>(block),
                                     static_cast<std::uint32_t>(block >> 32),
                                     static_cast<std::uint32_t>(counter_hi_),
                                     static_cast<std::uint32_t>(counter_hi_ >> 32)},
                                    key_);
        cached_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
        cached_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
        cached_block_ = block;
    }
    return cached_[position_++ & 1];
}

double RandomStream::next_uniform() {
    // Midpoint of one of 2^53 equal cells: strictly inside (0, 1).
    return (static_cast<double>(next_bits() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::next_normal() { return normal_quantile(next_uniform()); }

void RandomStream::fill_normal(std::span<double> out, double variance) {
    if (!(variance > 0.0)) {
        throw InvalidVariance("Gaussian increment needs dt > 0, got " + std::to_string(variance));
    }
    const double sd = std::sqrt(variance);
    for (double& v : out) v = sd * next_normal();
}

GaussianIncrement draw_increment(RandomStream& stream, int dim, double dt) {
    if (dim < 1) throw Error("increment dimension must be >= 1");
    GaussianIncrement inc;
    inc.dt = dt;
    inc.values.resize(static_cast<std::size_t>(dim));
    stream.fill_normal(inc.values, dt);
    return inc;
}

GaussianIncrement draw_increment(const StreamKey& key, int dim, double dt, std::uint64_t position) {
    RandomStream stream(key, position);
    return draw_increment(stream, dim, dt);
}

} // namespace mlpbsde
