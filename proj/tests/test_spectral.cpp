#include <doctest.h>

#include <cmath>
#include <random>

#include "peano/error.hpp"
#include "peano/characteristics.hpp"
#include "peano/spectral.hpp"

using namespace peano;

namespace {

const PointFunction kHarmonic = [](const Vector& x) { return 0.5 * x.squaredNorm(); };

// Lowest eigenvalue of the radial problem −½(u'' + u'/r) + V(r)u = λu on
// (0, R), u(R) = 0, by a finite-volume discretisation in r with exact
// cell integrals of r·V(r) and Sturm-count bisection on the symmetrised
// tridiagonal matrix. V(r) = A r^{2γ} + B r^{γ−1}.
double radial_ground_energy(double A, double B, double gamma, double R, int n) {
  const double h = R / n;
  std::vector<double> diag(n), off(n - 1), mass(n);
  auto moment = [](double p, double a, double b) { return (std::pow(b, p + 1) - std::pow(a, p + 1)) / (p + 1); };
  for (int i = 0; i < n; ++i) {
    const double a = i * h, b = (i + 1) * h;
    mass[i] = moment(1.0, a, b);
    const double pot = A * moment(2 * gamma + 1, a, b) + B * moment(gamma, a, b);
    const double left = i > 0 ? a / h : 0.0;
    const double right = i < n - 1 ? b / h : 2.0 * b / h;  // Dirichlet half a cell out
    diag[i] = 0.5 * (left + right) + pot;
    if (i < n - 1) off[i] = -0.5 * b / h;
  }
  // M^{-1/2} K M^{-1/2}
  for (int i = 0; i < n; ++i) diag[i] /= mass[i];
  for (int i = 0; i < n - 1; ++i) off[i] /= std::sqrt(mass[i] * mass[i + 1]);
  auto below = [&](double lam) {
    int count = 0;
    double d = diag[0] - lam;
    if (d < 0) ++count;
    for (int i = 1; i < n; ++i) {
      d = diag[i] - lam - off[i - 1] * off[i - 1] / (d == 0.0 ? 1e-300 : d);
      if (d < 0) ++count;
    }
    return count;
  };
  double lo = 0.0, hi = 100.0;
  while (hi - lo > 1e-13 * hi) {
    const double mid = 0.5 * (lo + hi);
    (below(mid) >= 1 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("grid validation") {
  CHECK_THROWS_AS((GridSpec{4, 1.0, 32, true}).validate(), Error);
  CHECK_THROWS_AS((GridSpec{1, 1.0, 8, true}).validate(), Error);
  CHECK_THROWS_AS((GridSpec{1, 1.0, 33, true}).validate(), Error);
  CHECK_THROWS_AS((GridSpec{1, -1.0, 32, true}).validate(), Error);
  const GridSpec g{1, 3.0, 64, true};
  CHECK(g.h() == doctest::Approx(6.0 / 64));
  for (int i = 0; i < g.n; ++i) CHECK(g.coord(i) != 0.0);  // no node at the origin
}

TEST_CASE("interior stencil and symmetry") {
  const GridSpec g{1, 2.0, 32, true};
  const auto op = assemble([](const Vector&) { return 0.0; }, g);
  const double h = g.h();
  CHECK(op.matrix.coeff(10, 9) == doctest::Approx(-0.5 / (h * h)));
  CHECK(op.matrix.coeff(10, 10) == doctest::Approx(1.0 / (h * h)));
  CHECK(op.matrix.coeff(10, 11) == doctest::Approx(-0.5 / (h * h)));

  const HomogeneousPotential pot(AngularProfile::cosine(1.0, 0.2, 2), 0.5);
  const auto op2 = assemble(pot, GridSpec{2, 3.0, 24, true});
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  Vector u(op2.matrix.rows()), v(op2.matrix.rows());
  for (auto& x : u) x = n01(rng);
  for (auto& x : v) x = n01(rng);
  const double a = u.dot(op2.matrix * v), b = v.dot(op2.matrix * u);
  CHECK(std::abs(a - b) <= 1e-12 * std::abs(a));
}

TEST_CASE("memory cap") {
  const HomogeneousPotential pot(AngularProfile::isotropic(3, 1.0), 0.5);
  CHECK_THROWS_AS(assemble(pot, GridSpec{3, 5.0, 512, true}), Error);
}

TEST_CASE("harmonic oscillator") {
  const auto res = bottom_spectrum(assemble(kHarmonic, GridSpec{1, 8.0, 4096, true}), 3);
  CHECK(std::abs(res.eigenvalues[0] - 0.5) < 1e-5);
  CHECK(std::abs(res.eigenvalues[1] - 1.5) < 1e-5);
  CHECK(std::abs(res.eigenvalues[2] - 2.5) < 1e-5);
  for (double r : res.residuals) CHECK(r <= 1e-8);
  // ψ₁ ∝ e^{−x²/2}, so e^{U}ψ₁ is flat
  double lo = 1e300, hi = 0.0;
  for (double x = -3.0; x <= 3.0; x += 0.25) {
    const double m = std::exp(0.5 * x * x) * res.interpolate(0, Vector::Constant(1, x));
    lo = std::min(lo, m);
    hi = std::max(hi, m);
  }
  CHECK((hi - lo) / hi < 1e-4);
}

TEST_CASE("harmonic ground energy on L = 12 with Richardson extrapolation") {
  // The 3-point stencil leaves h²/32 ≈ 4.3e−6 at n = 2048; the O(h²) term
  // extrapolates away with the n = 4096 value.
  const double c = bottom_spectrum(assemble(kHarmonic, GridSpec{1, 12.0, 2048, true}), 1).eigenvalues[0];
  const double f = bottom_spectrum(assemble(kHarmonic, GridSpec{1, 12.0, 4096, true}), 1).eigenvalues[0];
  CHECK(std::abs(c - 0.5) < 1e-5);
  CHECK(std::abs((4 * f - c) / 3 - 0.5) < 1e-6);
}

TEST_CASE("shooting") {
  CHECK(std::abs(shoot_1d(kHarmonic, 8.0, 0.2, 1.0) - 0.5) < 1e-8);
  CHECK_THROWS_AS(shoot_1d(kHarmonic, 8.0, 10.0, 20.0), Error);
}

TEST_CASE("gamma = 1/2 grid against shooting") {
  const HomogeneousPotential pot(AngularProfile::isotropic(1, 2.0 / 3.0), 0.5);
  const auto res = bottom_spectrum(assemble(pot, make_grid(pot, 2048)), 5);
  const double shot = shoot_1d(pot, 0.5, 0.5 * (res.eigenvalues[0] + res.eigenvalues[1]));
  CHECK(std::abs(res.eigenvalues[0] - shot) / shot < 1e-4);
  CHECK(res.eigenvalues[0] < res.eigenvalues[1]);
  for (const double v : res.eigenfunctions[0]) CHECK(v > 0.0);
  for (double r : res.residuals) CHECK(r <= 1e-8);

  const BoundReport rep = bound_check(res, pot);
  REQUIRE(rep.M.size() == 5);
  for (double m : rep.M) CHECK(std::isfinite(m));
  for (std::size_t i = 1; i < rep.profile_max.size(); ++i) CHECK(rep.profile_max[i] <= rep.profile_max[i - 1]);
}

TEST_CASE("outer decay of the ground state follows g up to a logarithm") {
  // −log ψ₁ − U = g + O(log|x|); the fitted coefficient of g is close to one.
  for (double gamma : {0.3, 0.5, 0.7}) {
    const HomogeneousPotential pot(AngularProfile::isotropic(1, 1.0 / (1 + gamma)), gamma);
    const auto res = bottom_spectrum(assemble(pot, make_grid(pot, 2048)), 2);
    const GFunction gf = build_g(pot, res.eigenvalues[0], 1.0);
    const BoundReport rep = bound_check(res, pot, [&](const Vector& x) { return eval_g(gf, x); });
    CHECK(rep.decay_checked);
    CHECK(std::abs(rep.decay_fit_coefficient - 1.0) < 0.05);
  }
}

TEST_CASE("two-dimensional isotropic ground energy against a radial oracle") {
  const double gamma = 0.5, c = 1.0;
  const HomogeneousPotential pot(AngularProfile::isotropic(2, c), gamma);
  const double L = 6.0;
  const double grid = bottom_spectrum(assemble(pot, GridSpec{2, L, 256, true}), 1).eigenvalues[0];
  // |b|² = ((1+γ)c)² r^{2γ}, div b = (1+γ)c(γ+1) r^{γ−1} in d = 2
  const double A = 0.5 * std::pow((1 + gamma) * c, 2), B = 0.5 * (1 + gamma) * c * (gamma + 1);
  const double oracle = radial_ground_energy(A, B, gamma, L, 40000);
  CHECK(std::abs(grid - oracle) / oracle < 1e-3);
}

TEST_CASE("interpolation stays inside the box") {
  const auto res = bottom_spectrum(assemble(kHarmonic, GridSpec{1, 6.0, 256, true}), 1);
  CHECK_THROWS_AS(res.interpolate(0, Vector::Constant(1, 6.5)), Error);
  CHECK(res.interpolate(0, Vector::Constant(1, 0.0)) > 0.0);
}

TEST_CASE("grid convergence is second order") {
  const HomogeneousPotential pot(AngularProfile::isotropic(1, 2.0 / 3.0), 0.5);
  const auto conv = grid_convergence(pot, make_grid(pot, 512));
  CHECK(conv.relative_change < 1e-4);
  const double shot = shoot_1d(pot, 0.5, 1.2);
  CHECK(std::abs(conv.richardson - shot) < std::abs(conv.fine - shot));
}
