#ifndef MCERT_RNG_HPP
#define MCERT_RNG_HPP

#include <cmath>
#include <cstdint>

namespace mcert {

/// PCG64 (XSL-RR 128/64). The LCG increment is derived from stream_id so
/// distinct ids give distinct, non-overlapping sequences for a given seed.
/// Same (seed, stream_id) always reproduces the same draws.
class RngStream {
public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : seed_(seed), stream_id_(stream_id) {
    std::uint64_t sm = seed;
    const unsigned __int128 s_hi = splitmix(sm);
    const unsigned __int128 s_lo = splitmix(sm);
    std::uint64_t sm_stream = stream_id ^ 0x6a09e667f3bcc909ULL;
    const unsigned __int128 i_hi = splitmix(sm_stream);
    inc_ = ((i_hi << 64) | static_cast<unsigned __int128>(stream_id)) << 1 | 1u;
    state_ = 0;
    next();
    state_ += (s_hi << 64) | s_lo;
    next();
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return next(); }

  std::uint64_t next() {
    const unsigned __int128 old = state_;
    state_ = old * multiplier() + inc_;
    const auto hi = static_cast<std::uint64_t>(old >> 64);
    const auto lo = static_cast<std::uint64_t>(old);
    const std::uint64_t x = hi ^ lo;
    const unsigned rot = static_cast<unsigned>(old >> 122);
    return (x >> rot) | (x << ((64u - rot) & 63u));
  }

  /// Uniform on the open interval (0, 1); log() of the result is finite.
  double uniform() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal, Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

private:
  static unsigned __int128 multiplier() {
    return (static_cast<unsigned __int128>(2549297995355413924ULL) << 64) |
           4865540595714422341ULL;
  }

  static std::uint64_t splitmix(std::uint64_t &x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  unsigned __int128 state_{};
  unsigned __int128 inc_{};
  double spare_{0.0};
  bool has_spare_{false};
};

} // namespace mcert

#endif
