#include <doctest.h>

#include <cmath>
#include <numbers>

#include "peano/error.hpp"
#include "peano/rates.hpp"
#include "peano/spectral.hpp"

using namespace peano;

namespace {

HomogeneousPotential herrmann() { return HomogeneousPotential(AngularProfile::isotropic(1, 2.0 / 3.0), 0.5); }

double lambda1() {
  static const double l = shoot_1d(herrmann(), 0.5, 1.2);
  return l;
}

const GFunction& herrmann_g() {
  static const GFunction gf = build_g(herrmann(), lambda1(), 2.0);
  return gf;
}

DiscretePath extremal(double delay, double sign = 1.0, int n = 1000) {
  return DiscretePath::from_function(
      [=](double t) {
        const double s = std::max(t - delay, 0.0);
        return Vector::Constant(1, sign * 0.25 * s * s);
      },
      1.0, n);
}

}  // namespace

TEST_CASE("rate values") {
  CHECK(RateValue::finite(0.5).value() == 0.5);
  CHECK(RateValue::infinity().is_infinite());
  CHECK(RateValue::infinity().str() == "inf");
  CHECK_THROWS_AS(RateValue::infinity().value(), Error);
}

TEST_CASE("path meshes") {
  std::vector<double> times{0.0, 0.1, 0.2, 0.35};
  std::vector<Vector> states(4, Vector::Zero(1));
  CHECK_THROWS_AS(DiscretePath::from_samples(times, states), Error);
  times[3] = 0.3;
  const DiscretePath p = DiscretePath::from_samples(times, states);
  CHECK(p.steps() == 3);
  CHECK(p.T() == doctest::Approx(0.3));
  CHECK_THROWS_AS(I1(p, herrmann()), Error);
}

TEST_CASE("rate functionals vanish on extremal flows") {
  const auto pot = herrmann();
  const double l1 = lambda1();
  for (double sign : {1.0, -1.0}) {
    const DiscretePath p = extremal(0.0, sign);
    const RateValue i1 = I1(p, pot);
    REQUIRE(!i1.is_infinite());
    CHECK(i1.value() <= 1e-6);
    const SolutionCheck chk = is_ode_solution(p, pot);
    CHECK(chk.is_solution);
    CHECK(chk.t0 == doctest::Approx(0.0));
    const RateValue i2 = I2(p, pot, herrmann_g());
    REQUIRE(!i2.is_infinite());
    CHECK(i2.value() <= 1e-6 * l1);
  }
  // the flow from integrate_extremal itself
  const ExtremalFlow f = integrate_extremal(pot, Vector::Constant(1, 1.0), 1.0);
  const DiscretePath q = DiscretePath::from_function([&](double t) { return f.at(t); }, 1.0, 1000);
  CHECK(I1(q, pot).value() <= 1e-6);
  CHECK(I2(q, pot, herrmann_g()).value() <= 1e-6 * l1);
}

TEST_CASE("delayed solutions cost lambda1 times the delay") {
  const auto pot = herrmann();
  for (double t0 : {0.1, 0.3, 0.6}) {
    const DiscretePath p = extremal(t0);
    const SolutionCheck chk = is_ode_solution(p, pot);
    CHECK(chk.is_solution);
    CHECK(chk.t0 == doctest::Approx(t0).epsilon(1e-3));
    CHECK(I2(p, pot, herrmann_g()).value() == doctest::Approx(lambda1() * t0).epsilon(1e-4));
    CHECK(I1(p, pot).value() <= 1e-6);
  }
  // the zero solution never leaves
  const DiscretePath zero = DiscretePath::from_function([](double) { return Vector::Zero(1); }, 1.0, 1000);
  CHECK(I2(zero, pot, herrmann_g()).value() == doctest::Approx(lambda1()).epsilon(1e-12));
}

TEST_CASE("non-solutions") {
  const auto pot = herrmann();
  const DiscretePath line = DiscretePath::from_function([](double t) { return Vector::Constant(1, t); }, 1.0, 2000);
  // ½∫(1 − √t)² dt = 1/12
  CHECK(I1(line, pot).value() == doctest::Approx(1.0 / 12.0).epsilon(1e-3));
  CHECK(I2(line, pot, herrmann_g()).is_infinite());
  CHECK(!is_ode_solution(line, pot).is_solution);

  const DiscretePath jump =
      DiscretePath::from_function([](double t) { return Vector::Constant(1, t < 0.5 ? 0.0 : 3.0); }, 1.0, 1000);
  CHECK(I1(jump, pot).is_infinite());

  SDEConfig c;
  c.epsilon = 0.5;
  c.T = 1.0;
  c.dt = 1e-3;
  c.n_paths = 8;
  const PathEnsemble ens = simulate(pot, c);
  for (const RateReport& r : evaluate_paths(ens, pot, herrmann_g())) {
    CHECK(r.i2.is_infinite());
    CHECK(!r.check.is_solution);
    CHECK((r.i1.is_infinite() || r.i1.value() > 0.0));
  }
}

TEST_CASE("alpha in one dimension") {
  const auto pot = herrmann();
  const auto flows = flow_bundle(pot, 1.0);
  SDEConfig c;
  c.epsilon = 0.2;
  c.T = 1.0;
  c.dt = 1e-3;
  c.n_paths = 4000;
  c.record_stride = 100;
  const PathEnsemble ens = simulate(pot, c);
  const AlphaEstimate a = estimate_alpha(ens, flows, 1.0, 0.1);
  REQUIRE(a.weights.size() == 2);
  CHECK(a.n == 4000);
  CHECK(a.weights[0] + a.weights[1] + a.unclassified == doctest::Approx(1.0));
  CHECK(std::abs(a.weights[0] - a.weights[1]) < 3 * std::hypot(a.stderr_[0], a.stderr_[1]));
  CHECK(a.dof == 1);
  CHECK_THROWS_AS(estimate_alpha(ens, flows, 1.0, 0.3), Error);
}

TEST_CASE("alpha is balanced for a rotation-invariant drift in the plane") {
  const HomogeneousPotential pot(AngularProfile::isotropic(2, 2.0 / 3.0), 0.5);
  std::vector<ExtremalFlow> flows;
  for (int i = 0; i < 4; ++i) {
    const double a = i * std::numbers::pi / 2;
    flows.push_back(integrate_extremal(pot, Vector{{std::cos(a), std::sin(a)}}, 1.0));
  }
  SDEConfig c;
  c.epsilon = 0.3;
  c.T = 1.0;
  c.dt = 1e-3;
  c.n_paths = 8000;
  c.record_stride = 1000;
  const PathEnsemble ens = simulate(pot, c);
  const AlphaEstimate a = estimate_alpha(ens, flows, 1.0, 0.15);
  CHECK(a.dof == 3);
  for (double w : a.weights) CHECK(w > 0.0);
  CHECK(a.chi2 < 16.27);  // 0.999 quantile of χ²₃
}
