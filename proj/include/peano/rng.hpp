#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace peano {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Philox4x32-10 block: 128-bit counter, 64-bit key.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u, W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  std::uint32_t c0 = c[0], c1 = c[1], c2 = c[2], c3 = c[3], k0 = k[0], k1 = k[1];
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{M0} * c0;
    const std::uint64_t p1 = std::uint64_t{M1} * c2;
    const std::uint32_t n0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1 ^ k0;
    const std::uint32_t n2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3 ^ k1;
    c1 = static_cast<std::uint32_t>(p1);
    c3 = static_cast<std::uint32_t>(p0);
    c0 = n0;
    c2 = n2;
    k0 += W0;
    k1 += W1;
  }
  return {c0, c1, c2, c3};
}

/// Counter-based stream identified by (key, stream id). Draw i of stream s is a
/// pure function of (key, s, i), which is what makes ensembles independent of
/// how paths are split across workers.
class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t key, std::uint64_t stream)
      : k0_(static_cast<std::uint32_t>(key)), k1_(static_cast<std::uint32_t>(key >> 32)), stream_(stream) {}

  std::uint64_t next_u64() {
    if (pos_ == kBuffered) refill();
    return buf_[pos_++];
  }
  /// Uniform on (0, 1), never exactly 0.
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  std::uint64_t blocks_used() const { return block_; }

 private:
  static constexpr int kLanes = 8;
  static constexpr int kBuffered = 2 * kLanes;

  // kLanes consecutive counters at once; the lanes are independent, so the
  // rounds vectorize. Output equals kLanes calls of philox4x32.
  void refill() {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u, W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    std::uint32_t c0[kLanes], c1[kLanes], c2[kLanes], c3[kLanes];
    for (int l = 0; l < kLanes; ++l) {
      const std::uint64_t b = block_ + static_cast<std::uint64_t>(l);
      c0[l] = static_cast<std::uint32_t>(b);
      c1[l] = static_cast<std::uint32_t>(b >> 32);
      c2[l] = static_cast<std::uint32_t>(stream_);
      c3[l] = static_cast<std::uint32_t>(stream_ >> 32);
    }
    std::uint32_t k0 = k0_, k1 = k1_;
    for (int round = 0; round < 10; ++round) {
      for (int l = 0; l < kLanes; ++l) {
        const std::uint64_t p0 = std::uint64_t{M0} * c0[l];
        const std::uint64_t p1 = std::uint64_t{M1} * c2[l];
        const std::uint32_t n0 = static_cast<std::uint32_t>(p1 >> 32) ^ c1[l] ^ k0;
        const std::uint32_t n2 = static_cast<std::uint32_t>(p0 >> 32) ^ c3[l] ^ k1;
        c1[l] = static_cast<std::uint32_t>(p1);
        c3[l] = static_cast<std::uint32_t>(p0);
        c0[l] = n0;
        c2[l] = n2;
      }
      k0 += W0;
      k1 += W1;
    }
    for (int l = 0; l < kLanes; ++l) {
      buf_[2 * l] = (std::uint64_t{c1[l]} << 32) | c0[l];
      buf_[2 * l + 1] = (std::uint64_t{c3[l]} << 32) | c2[l];
    }
    block_ += kLanes;
    pos_ = 0;
  }

  std::uint32_t k0_, k1_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::uint64_t buf_[kBuffered];
  int pos_ = kBuffered;
};

namespace detail {

struct ZigguratTables {
  static constexpr int N = 128;
  double x[N + 1];
  double f[N + 1];

  ZigguratTables() {
    const double R = 3.442619855899, V = 9.91256303526217e-3;
    auto pdf = [](double v) { return std::exp(-0.5 * v * v); };
    x[0] = V / pdf(R);
    x[1] = R;
    for (int i = 1; i < N - 1; ++i) x[i + 1] = std::sqrt(-2.0 * std::log(V / x[i] + pdf(x[i])));
    x[N] = 0.0;
    for (int i = 0; i <= N; ++i) f[i] = pdf(x[i]);
  }
};

inline const ZigguratTables kZiggurat{};

inline const ZigguratTables& ziggurat_tables() { return kZiggurat; }

}  // namespace detail

/// Standard normal by the 128-layer ziggurat (Doornik's variant). Layer index
/// and sign come from the low 8 bits, the abscissa from the top 53.
template <typename Stream>
double normal(Stream& s) {
  const auto& z = detail::ziggurat_tables();
  constexpr double R = 3.442619855899;
  for (;;) {
    const std::uint64_t u = s.next_u64();
    const int i = static_cast<int>(u & 127);
    const double sign = (u & 128) ? -1.0 : 1.0;
    const double v = static_cast<double>(u >> 11) * 0x1.0p-53 * z.x[i];
    if (v < z.x[i + 1]) return sign * v;
    if (i == 0) {
      double a, b;
      do {
        a = -std::log(s.uniform()) / R;
        b = -std::log(s.uniform());
      } while (2.0 * b < a * a);
      return sign * (R + a);
    }
    if (z.f[i] + s.uniform() * (z.f[i + 1] - z.f[i]) < std::exp(-0.5 * v * v)) return sign * v;
  }
}

}  // namespace peano
