#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "peano/error.hpp"
#include "peano/sde.hpp"

using namespace peano;

namespace {

HomogeneousPotential herrmann() { return HomogeneousPotential(AngularProfile::isotropic(1, 2.0 / 3.0), 0.5); }

std::uint64_t first_draw(std::uint64_t key, std::uint64_t stream) {
  PhiloxStream s(key, stream);
  return s.next_u64();
}

}  // namespace

TEST_CASE("philox known answers") {
  using A4 = std::array<std::uint32_t, 4>;
  using A2 = std::array<std::uint32_t, 2>;
  CHECK(philox4x32(A4{0, 0, 0, 0}, A2{0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32(A4{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, A2{0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32(A4{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, A2{0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("buffered stream matches the scalar generator") {
  const std::uint64_t key = 0x0123456789abcdefULL, stream = 77;
  PhiloxStream s(key, stream);
  using A2 = std::array<std::uint32_t, 2>;
  const A2 k{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)};
  for (std::uint64_t b = 0; b < 40; ++b) {
    const auto out = philox4x32({static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                                 static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
                                k);
    CHECK(s.next_u64() == ((std::uint64_t{out[1]} << 32) | out[0]));
    CHECK(s.next_u64() == ((std::uint64_t{out[3]} << 32) | out[2]));
  }
  CHECK(first_draw(key, 1) != first_draw(key, 2));
}

TEST_CASE("ziggurat normal moments") {
  PhiloxStream s(42, 0);
  const int n = 1000000;
  double m1 = 0, m2 = 0, m3 = 0, m4 = 0, tail = 0;
  for (int i = 0; i < n; ++i) {
    const double z = normal(s);
    m1 += z;
    m2 += z * z;
    m3 += z * z * z;
    m4 += z * z * z * z;
    tail += std::abs(z) > 3.5;
  }
  m1 /= n, m2 /= n, m3 /= n, m4 /= n;
  CHECK(std::abs(m1) < 5 * std::sqrt(1.0 / n));
  CHECK(std::abs(m2 - 1) < 5 * std::sqrt(2.0 / n));
  CHECK(std::abs(m3) < 5 * std::sqrt(15.0 / n));
  CHECK(std::abs(m4 - 3) < 5 * std::sqrt(96.0 / n));
  const double p = 4.652581580710e-4;  // P(|Z| > 3.5)
  CHECK(std::abs(tail / n - p) < 5 * std::sqrt(p / n));
}

TEST_CASE("config validation") {
  SDEConfig c;
  c.dt = 2.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = SDEConfig{};
  c.epsilon = -1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = SDEConfig{};
  c.n_paths = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK(epsilon_gamma(0.25, 0.5) == doctest::Approx(std::pow(0.25, 2.0 / 3.0)));
  CHECK(default_dt(0.5, 0.5) == 1e-4);
  CHECK(default_dt(1e-4, 0.5) == doctest::Approx(epsilon_gamma(1e-4, 0.5) / 50));
}

TEST_CASE("zero noise from the origin stays at rest") {
  SDEConfig c;
  c.epsilon = 0.0;
  c.T = 0.5;
  c.dt = 1e-3;
  c.n_paths = 16;
  const PathEnsemble ens = simulate(herrmann(), c);
  for (double v : ens.data) CHECK(v == 0.0);
}

TEST_CASE("zero drift gives Brownian variance") {
  SDEConfig c;
  c.epsilon = 0.3;
  c.T = 2.0;
  c.dt = 0.01;
  c.n_paths = 40000;
  c.record_stride = 50;
  const PathEnsemble ens = simulate_zero_drift(2, c);
  const Matrix end = endpoint_slice(ens, 2.0);
  REQUIRE(end.rows() == 40000);
  const double target = c.epsilon * c.epsilon * c.T;
  for (int a = 0; a < 2; ++a) {
    const double var = end.col(a).squaredNorm() / end.rows();
    CHECK(std::abs(var - target) < 3 * target * std::sqrt(2.0 / end.rows()));
  }
}

TEST_CASE("Gronwall bound through the driving noise") {
  const auto pot = herrmann();
  SDEConfig c;
  c.epsilon = 0.4;
  c.T = 1.0;
  c.dt = 1e-3;
  c.n_paths = 50;
  const PathEnsemble ens = simulate(pot, c);
  // |b(x)| = |x|^{1/2} ≤ 1 + |x| here
  const double A = 1.0;
  for (std::size_t p = 0; p < c.n_paths; ++p) {
    const auto W = brownian_path(1, c, p);
    double supW = 0.0;
    for (double w : W) supW = std::max(supW, std::abs(c.epsilon * w));
    double supX = 0.0;
    for (std::size_t r = 0; r < ens.records(); ++r) supX = std::max(supX, std::abs(ens.state(p, r)[0]));
    CHECK(supX <= (A * c.T + supW) * std::exp(A * c.T));
    CHECK(supX > 0.0);
  }
}

TEST_CASE("path equals the recursion driven by its Brownian increments") {
  const auto pot = herrmann();
  SDEConfig c;
  c.epsilon = 0.2;
  c.T = 0.3;
  c.dt = 1e-3;
  c.n_paths = 3;
  const PathEnsemble ens = simulate(pot, c);
  const auto W = brownian_path(1, c, 2);
  double x = 0.0;
  for (long k = 1; k <= ens.n_steps; ++k) {
    const double b = std::copysign(std::sqrt(std::abs(x)), x);
    x += b * ens.dt + c.epsilon * (W[k] - W[k - 1]);
  }
  CHECK(ens.state(2, ens.records() - 1)[0] == doctest::Approx(x).epsilon(1e-12));
}

TEST_CASE("endpoint slices") {
  SDEConfig c;
  c.epsilon = 0.5;
  c.T = 1.0;
  c.dt = 0.01;
  c.n_paths = 100;
  c.record_stride = 10;
  const PathEnsemble ens = simulate(herrmann(), c);
  CHECK(endpoint_slice(ens, 0.0).cwiseAbs().maxCoeff() == 0.0);
  const Matrix half = endpoint_slice(ens, 0.5);
  const Matrix end = endpoint_slice(ens, 1.0);
  CHECK(half.rows() == 100);
  CHECK(end(7, 0) == ens.state(7, ens.records() - 1)[0]);
  CHECK(half(3, 0) == ens.state(3, 5)[0]);
  CHECK_THROWS_AS(endpoint_slice(ens, 1.5), Error);
  CHECK_THROWS_AS(endpoint_slice(ens, 0.55), Error);
}

TEST_CASE("results do not depend on the worker count") {
  const HomogeneousPotential pot(AngularProfile::cosine(1.0, 0.3, 2), 0.5);
  SDEConfig c;
  c.epsilon = 0.3;
  c.T = 0.5;
  c.dt = 1e-3;
  c.n_paths = 257;
  c.record_stride = 100;
  const PathEnsemble a = simulate(pot, c, 1);
  const PathEnsemble b = simulate(pot, c, 3);
  CHECK(a.data == b.data);
  const PathEnsemble a1 = simulate(herrmann(), c, 1);
  const PathEnsemble b1 = simulate(herrmann(), c, 4);
  CHECK(a1.data == b1.data);
  c.master_seed = 2;
  CHECK(simulate(herrmann(), c, 1).data != a1.data);
}

TEST_CASE("ensemble files round-trip") {
  SDEConfig c;
  c.epsilon = 0.3;
  c.T = 0.2;
  c.dt = 1e-3;
  c.n_paths = 20;
  c.record_stride = 20;
  const PathEnsemble ens = simulate(HomogeneousPotential(AngularProfile::cosine(1.0, 0.3, 2), 0.5), c);
  const auto path = (std::filesystem::temp_directory_path() / "peano_roundtrip.bin").string();
  write_ensemble(ens, path);
  const PathEnsemble back = read_ensemble(path);
  CHECK(back.d == 2);
  CHECK(back.data == ens.data);
  CHECK(back.recorded_steps == ens.recorded_steps);
  CHECK(back.dt == ens.dt);
  CHECK(back.config.master_seed == c.master_seed);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_ensemble(path), Error);
}
