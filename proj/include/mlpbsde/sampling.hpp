#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace mlpbsde {

inline constexpr std::size_t kMaxStreamDepth = 32;

/// One recursion frame of a stream path.
struct StreamFrame {
    int level = 0;
    std::int64_t replica = 0;
    int slot = 0;

    friend bool operator==(const StreamFrame&, const StreamFrame&) = default;
};

/// Identifies an independent random stream: a root seed plus the recursion
/// path that led to it. Two 64-bit digests of (seed, path) are kept alongside
/// the path; they key the counter-based generator.
class StreamKey {
public:
    StreamKey() : StreamKey(0) {}
    explicit StreamKey(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }
    const std::vector<StreamFrame>& path() const { return path_; }
    std::array<std::uint64_t, 2> digest() const { return digest_; }

    friend bool operator==(const StreamKey& a, const StreamKey& b) {
        return a.seed_ == b.seed_ && a.path_ == b.path_;
    }

private:
    friend StreamKey child_key(const StreamKey& key, int level, std::int64_t replica, int slot);

    std::uint64_t seed_ = 0;
    std::vector<StreamFrame> path_;
    std::array<std::uint64_t, 2> digest_{};
};

/// key with (level, replica, slot) appended. Throws once the path would exceed
/// kMaxStreamDepth frames.
StreamKey child_key(const StreamKey& key, int level, std::int64_t replica, int slot);

/// Philox4x32-10 block function (Salmon et al.), exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Stateless splittable seed derivation (splitmix64 finaliser).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

struct GaussianIncrement {
    double dt = 0.0;
    std::vector<double> values;
};

/// Sequential view of the standard-normal sequence attached to a StreamKey.
/// The i-th normal depends only on (key, i), so a stream can be re-opened at
/// any position and yield the same values.
class RandomStream {
public:
    explicit RandomStream(const StreamKey& key, std::uint64_t position = 0);

    std::uint64_t position() const { return position_; }
    void seek(std::uint64_t position) { position_ = position; }

    double next_uniform();
    double next_normal();

    /// Fills out with i.i.d. N(0, variance) values.
    void fill_normal(std::span<double> out, double variance);

private:
    std::uint64_t next_bits();

    std::array<std::uint32_t, 2> key_{};
    std::uint64_t counter_hi_ = 0;
    std::uint64_t position_ = 0;
    std::uint64_t cached_block_ = ~std::uint64_t{0};
    std::array<std::uint64_t, 2> cached_{};
};

/// dim i.i.d. N(0, dt) values taken from the stream at its current position.
GaussianIncrement draw_increment(RandomStream& stream, int dim, double dt);

/// As above, for a stream opened on key at the given position.
GaussianIncrement draw_increment(const StreamKey& key, int dim, double dt,
                                 std::uint64_t position = 0);

/// Standard normal quantile, inverse-CDF transform used by RandomStream.
double normal_quantile(double u);

} // namespace mlpbsde
