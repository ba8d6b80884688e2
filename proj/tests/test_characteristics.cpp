#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "peano/error.hpp"
#include "peano/characteristics.hpp"
#include "peano/spectral.hpp"

using namespace peano;

namespace {

HomogeneousPotential herrmann() { return HomogeneousPotential(AngularProfile::isotropic(1, 2.0 / 3.0), 0.5); }

Vector unit2(double a) { return Vector{{std::cos(a), std::sin(a)}}; }

double herrmann_lambda1() {
  static const double l = [] {
    const auto pot = herrmann();
    return shoot_1d(pot, 0.5, 1.2);
  }();
  return l;
}

}  // namespace

TEST_CASE("extremal closed form in one dimension") {
  const auto pot = herrmann();
  const ExtremalFlow f = integrate_extremal(pot, Vector::Constant(1, 1.0), 2.0);
  CHECK(f.at(1.0)[0] == doctest::Approx(0.25).epsilon(1e-6));
  double worst = 0.0;
  for (double t = 0.01; t <= 2.0; t += 0.01) worst = std::max(worst, std::abs(f.at(t)[0] / (0.25 * t * t) - 1));
  CHECK(worst <= 1e-6);
  CHECK(f.at(1.4).norm() / f.at(0.7).norm() == doctest::Approx(4.0).epsilon(1e-6));
  const ExtremalFlow m = integrate_extremal(pot, Vector::Constant(1, -1.0), 1.0);
  CHECK(m.at(1.0)[0] == doctest::Approx(-0.25).epsilon(1e-6));
  CHECK(f.time_at_radius(0.25) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("extremal properties") {
  const HomogeneousPotential pot(AngularProfile::cosine(1.0, 0.3, 2), 0.5);
  const ExtremalFlow f = integrate_extremal(pot, unit2(0.4), 2.0);
  double prev = 0.0;
  for (double t = 0.02; t <= 2.0; t += 0.02) {
    const Vector x = f.at(t);
    CHECK(x.norm() > prev);
    prev = x.norm();
    // ODE residual by central differences of the dense output
    const double h = 1e-5;
    if (t > 0.05 && t < 1.95) {
      const Vector v = (f.at(t + h) - f.at(t - h)) / (2 * h);
      const Vector b = eval_drift(pot, x);
      CHECK((v - b).norm() <= 1e-4 * b.norm());
    }
  }
}

TEST_CASE("constant profile in the plane keeps its direction") {
  const double gamma = 0.5;
  const HomogeneousPotential pot(AngularProfile::isotropic(2, 1.0 / (1 + gamma)), gamma);
  const Vector w0 = unit2(1.1);
  const ExtremalFlow f = integrate_extremal(pot, w0, 1.5);
  for (double t : {0.1, 0.5, 1.0, 1.5}) {
    const Vector x = f.at(t);
    CHECK((x / x.norm() - w0).norm() < 1e-10);
    CHECK(x.norm() == doctest::Approx(std::pow((1 - gamma) * t, 1 / (1 - gamma))).epsilon(1e-6));
  }
}

TEST_CASE("anisotropic extremals settle at a critical point of the profile") {
  const HomogeneousPotential pot(AngularProfile::cosine(1.0, 0.3, 2), 0.5);
  const ExtremalFlow f = integrate_extremal(pot, unit2(0.6), 50.0);
  const auto angle = [&](double t) {
    const Vector x = f.at(t);
    return std::atan2(x[1], x[0]);
  };
  const double late = std::abs(angle(50.0) - angle(40.0));
  const double early = std::abs(angle(2.0) - angle(1.0));
  CHECK(late < 0.1 * early);
  const Vector lim = limiting_angle(pot, unit2(0.6));
  const Vector tg = pot.profile().gradient(lim) - pot.profile().gradient(lim).dot(lim) * lim;
  CHECK(tg.norm() < 1e-6);
}

TEST_CASE("seed time matches the closed form for constant profiles") {
  const double gamma = 0.4, c = 0.9, r0 = 1e-6;
  const HomogeneousPotential pot(AngularProfile::isotropic(2, c), gamma);
  const double expect = std::pow(r0, 1 - gamma) / ((1 - gamma) * (1 + gamma) * c);
  CHECK(seed_time(pot, unit2(2.0), r0) == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("g in one dimension") {
  const auto pot = herrmann();
  const double l1 = herrmann_lambda1();
  const GFunction gf = build_g(pot, l1, 2.0);
  CHECK(eval_g(gf, Vector::Zero(1)) == 0.0);
  CHECK(eval_g(gf, Vector::Constant(1, 1.0)) == doctest::Approx(-2 * l1).epsilon(1e-8));
  CHECK(eval_g(gf, Vector::Constant(1, 0.8)) / eval_g(gf, Vector::Constant(1, 0.2)) == doctest::Approx(2.0));
  for (double r = 0.05; r <= 2.0; r += 0.05)
    for (double s : {-1.0, 1.0})
      CHECK(eval_g(gf, Vector::Constant(1, s * r)) ==
            doctest::Approx(-l1 * std::sqrt(r) / 0.5).epsilon(1e-4));

  const Vector x = Vector::Constant(1, 0.7);
  CHECK(asymptotic_g(gf, x) / eval_g(gf, x) == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(asymptotic_g(gf, 3.0 * x) == doctest::Approx(std::pow(3.0, 0.5) * asymptotic_g(gf, x)).epsilon(1e-14));
  CHECK(asymptotic_g(gf, -x) < 0.0);

  std::vector<Vector> pts;
  for (double r : {0.1, 0.4, 1.3, 1.9}) {
    pts.push_back(Vector::Constant(1, r));
    pts.push_back(Vector::Constant(1, -r));
  }
  CHECK(verify_pde(gf, pts).max_relative_residual <= 1e-6);
}

TEST_CASE("g with an uneven two-sided profile") {
  const HomogeneousPotential pot(AngularProfile::two_sided(1.0, 0.4), 0.3);
  const GFunction gf = build_g(pot, 1.3, 1.0);
  for (double s : {-1.0, 1.0}) {
    const double th = pot.profile().value(Vector::Constant(1, s));
    const double exact = -1.3 * std::pow(0.8, 0.7) / (0.7 * 1.3 * th);
    CHECK(eval_g(gf, Vector::Constant(1, 0.8 * s)) == doctest::Approx(exact).epsilon(1e-6));
  }
}

TEST_CASE("transport PDE on an anisotropic planar profile") {
  const HomogeneousPotential pot(AngularProfile::cosine(1.0, 0.3, 2), 0.5);
  const double l1 = 1.7;
  const GFunction gf = build_g(pot, l1, 1.0);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ang(0.0, 2 * std::numbers::pi), rad(0.05, 2.0);
  std::vector<Vector> pts;
  for (int i = 0; i < 100; ++i) pts.push_back(rad(rng) * unit2(ang(rng)));
  const PdeReport rep = verify_pde(gf, pts);
  CHECK(rep.samples == 100);
  CHECK(rep.max_relative_residual <= 1e-3);

  // homogeneity of g and a residual bound unchanged by rescaling
  std::vector<Vector> scaled;
  for (const auto& p : pts) scaled.push_back(3.7 * p);
  CHECK(verify_pde(gf, scaled).max_relative_residual <= 1e-3);
  for (int i = 0; i < 10; ++i)
    CHECK(eval_g(gf, 2.5 * pts[i]) == doctest::Approx(std::pow(2.5, 0.5) * eval_g(gf, pts[i])).epsilon(1e-9));
}

TEST_CASE("isotropic g in three dimensions") {
  const HomogeneousPotential pot(AngularProfile::isotropic(3, 1.0), 0.5);
  const GFunction gf = build_g(pot, 2.0, 1.0, 200);
  const Vector x{{0.3, -0.5, 0.4}};
  CHECK(eval_g(gf, x) == doctest::Approx(-2.0 * std::sqrt(x.norm()) / (0.5 * 1.5)).epsilon(1e-6));
}

TEST_CASE("unreachable directions are reported") {
  const auto pot = herrmann();
  const GFunction one_sided(pot, 1.0, {integrate_extremal(pot, Vector::Constant(1, 1.0), 1.0)});
  CHECK_THROWS_AS(eval_g(one_sided, Vector::Constant(1, -0.5)), Error);

  const HomogeneousPotential p2(AngularProfile::cosine(1.0, 0.2, 2), 0.5);
  std::vector<ExtremalFlow> quarter;
  for (int i = 0; i < 16; ++i) quarter.push_back(integrate_extremal(p2, unit2(0.1 * i), 1.0));
  const GFunction partial(p2, 1.0, std::move(quarter));
  CHECK_THROWS_AS(eval_g(partial, unit2(4.0)), Error);
  CHECK_NOTHROW(eval_g(partial, unit2(0.75)));
}
