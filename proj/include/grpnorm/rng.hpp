#pragma once

#include <cstdint>

namespace grpnorm {

/// Identifies one reproducible random stream. Equal (seed, stream) pairs give
/// bit-identical draw sequences on every platform.
struct RngState {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    /// Derives a child stream, e.g. per (iteration, cell) so concurrent cell
    /// sampling is schedule-independent.
    RngState child(std::uint64_t a, std::uint64_t b = 0) const;
};

/// SplitMix64 counter generator: output i is a fixed 64-bit mix of
/// state0 + i*gamma, so streams are cheap to fork and fully portable
/// (no implementation-defined distributions are used anywhere).
class Rng {
  public:
    explicit Rng(RngState st);

    std::uint64_t next_u64();

    /// Uniform on [0,1) with 53 random bits.
    double next_double();

    /// Uniform on (0,1): never returns exactly 0 or 1.
    double next_open();

    /// Standard normal via the inverse CDF (deterministic across platforms).
    double next_normal();

  private:
    std::uint64_t state_;
};

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace detail

inline RngState RngState::child(std::uint64_t a, std::uint64_t b) const {
    RngState c;
    c.seed = seed;
    c.stream = detail::mix64(stream + detail::kGolden * (a + 1)) ^ detail::mix64(~b);
    return c;
}

inline Rng::Rng(RngState st)
    : state_(detail::mix64(st.seed + detail::kGolden) ^ detail::mix64(st.stream + 0x5851F42D4C957F2DULL)) {}

inline std::uint64_t Rng::next_u64() {
    state_ += detail::kGolden;
    return detail::mix64(state_);
}

inline double Rng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

inline double Rng::next_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace grpnorm
