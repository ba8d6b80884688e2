#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "peano/error.hpp"
#include "peano/potential.hpp"

using namespace peano;

namespace {

HomogeneousPotential herrmann() { return HomogeneousPotential(AngularProfile::isotropic(1, 2.0 / 3.0), 0.5); }

Vector unit2(double a) { return Vector{{std::cos(a), std::sin(a)}}; }

// Fourth-order central differences of U, the oracle for b and ΔU.
Vector fd_grad(const HomogeneousPotential& pot, const Vector& x, double h) {
  Vector g(x.size());
  for (Eigen::Index a = 0; a < x.size(); ++a) {
    Vector e = Vector::Zero(x.size());
    e[a] = h;
    g[a] = (-eval_U(pot, x + 2 * e) + 8 * eval_U(pot, x + e) - 8 * eval_U(pot, x - e) + eval_U(pot, x - 2 * e)) /
           (12 * h);
  }
  return g;
}

double fd_laplacian(const HomogeneousPotential& pot, const Vector& x, double h) {
  double s = 0.0;
  for (Eigen::Index a = 0; a < x.size(); ++a) {
    Vector e = Vector::Zero(x.size());
    e[a] = h;
    s += (-eval_U(pot, x + 2 * e) + 16 * eval_U(pot, x + e) - 30 * eval_U(pot, x) + 16 * eval_U(pot, x - e) -
          eval_U(pot, x - 2 * e)) /
         (12 * h * h);
  }
  return s;
}

}  // namespace

TEST_CASE("closed-form values in one dimension") {
  const auto pot = herrmann();
  CHECK(eval_U(pot, Vector::Zero(1)) == 0.0);
  CHECK(eval_U(pot, Vector::Constant(1, 1.0)) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(eval_U(pot, Vector::Constant(1, 0.7 * 2)) / eval_U(pot, Vector::Constant(1, 0.7)) ==
        doctest::Approx(std::pow(2.0, 1.5)).epsilon(1e-13));
  CHECK(eval_drift(pot, Vector::Zero(1)).norm() == 0.0);
  CHECK(eval_drift(pot, Vector::Constant(1, 4.0))[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(eval_drift(pot, Vector::Constant(1, -4.0))[0] == doctest::Approx(-2.0).epsilon(1e-14));
  CHECK(theta1(pot, Vector::Constant(1, 1.0))[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(eval_V(pot, Vector::Constant(1, 1.0)) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(pot.profile().gradient(Vector::Constant(1, 1.0)).norm() == 0.0);
}

TEST_CASE("invalid inputs are rejected") {
  const auto pot = herrmann();
  CHECK_THROWS_AS(theta1(pot, Vector::Constant(1, 0.5)), Error);
  CHECK_THROWS_AS(eval_V(pot, Vector::Zero(1)), Error);
  CHECK_THROWS_AS(HomogeneousPotential(AngularProfile::isotropic(1, 1.0), 1.0), Error);
  CHECK_THROWS_AS(HomogeneousPotential(AngularProfile::isotropic(1, 1.0), 0.0), Error);
  CHECK_THROWS_AS(HomogeneousPotential(AngularProfile::two_sided(1.0, -0.5), 0.5), Error);
}

TEST_CASE("homogeneity of U, b and div b") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0), s(0.1, 5.0);
  const HomogeneousPotential pots[] = {herrmann(), HomogeneousPotential(AngularProfile::two_sided(1.0, 0.4), 0.3),
                                       HomogeneousPotential(AngularProfile::cosine(1.0, 0.3, 3), 0.6),
                                       HomogeneousPotential(AngularProfile::isotropic(3, 0.8), 0.4)};
  for (const auto& pot : pots) {
    const double g = pot.gamma();
    for (int i = 0; i < 20; ++i) {
      Vector x(pot.dimension());
      for (auto& v : x) v = u(rng);
      const double l = s(rng);
      CHECK(eval_U(pot, l * x) == doctest::Approx(std::pow(l, 1 + g) * eval_U(pot, x)).epsilon(1e-10));
      CHECK((eval_drift(pot, l * x) - std::pow(l, g) * eval_drift(pot, x)).norm() <=
            1e-10 * eval_drift(pot, l * x).norm());
      CHECK(eval_divergence(pot, l * x) ==
            doctest::Approx(std::pow(l, g - 1) * eval_divergence(pot, x)).epsilon(1e-9));
      // the two parts of V scale separately
      const double b2 = eval_drift(pot, x).squaredNorm(), b2l = eval_drift(pot, l * x).squaredNorm();
      CHECK(b2l == doctest::Approx(std::pow(l, 2 * g) * b2).epsilon(1e-10));
    }
  }
}

TEST_CASE("profile gradient agrees with finite differences") {
  const AngularProfile profiles[] = {AngularProfile::cosine(1.0, 0.3, 3),
                                     AngularProfile::tabulated({0.0, 1.0, 2.0, 3.0, 4.0, 5.0},
                                                               {1.0, 1.3, 0.9, 1.1, 0.8, 1.2})};
  for (const auto& prof : profiles) {
    for (double a = 0.05; a < 6.28; a += 0.41) {
      const Vector w = unit2(a);
      const double h = 1e-5;
      Vector fd(2);
      for (int k = 0; k < 2; ++k) {
        Vector e = Vector::Zero(2);
        e[k] = h;
        fd[k] = (prof.value(w + e) - prof.value(w - e)) / (2 * h);
      }
      CHECK((prof.gradient(w) - fd).norm() <= 1e-8);
      CHECK(prof.value(w) > 0.0);
    }
  }
}

TEST_CASE("theta1 lower bounds") {
  const HomogeneousPotential pot(AngularProfile::cosine(1.0, 0.4, 2), 0.5);
  for (const Vector& w : sphere_mesh(2, 64)) {
    const double th = pot.profile().value(w);
    const double t1 = theta1(pot, w).squaredNorm();
    CHECK(t1 >= (1.5 * th) * (1.5 * th) * (1 - 1e-12));
    CHECK(t1 > th * th);
  }
}

TEST_CASE("V in two dimensions against a finite-difference oracle on U") {
  const HomogeneousPotential pots[] = {HomogeneousPotential(AngularProfile::isotropic(2, 0.8), 0.5),
                                       HomogeneousPotential(AngularProfile::cosine(1.0, 0.3, 3), 0.5)};
  for (const auto& pot : pots) {
    for (double r : {0.5, 1.0, 2.5, 5.0}) {
      for (double a : {0.3, 1.9, 4.4}) {
        const Vector x = r * unit2(a);
        const double h = 1e-2 * r;
        const double oracle = 0.5 * (fd_grad(pot, x, h).squaredNorm() + fd_laplacian(pot, x, h));
        CHECK(eval_V(pot, x) == doctest::Approx(oracle).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("decomposition without a negative part") {
  const auto pot = herrmann();
  const PotentialDecomposition dec = decompose(pot);
  CHECK(dec.sup_theta2_negative == 0.0);
  CHECK(dec.z == 0.0);
  CHECK(dec.p == doctest::Approx(1.25));
  for (double x : {-3.0, -0.2, 0.01, 0.5, 4.0}) {
    const Vector v = Vector::Constant(1, x);
    CHECK(dec.V2(v) == 0.0);
    CHECK(dec.V1(v) == doctest::Approx(eval_V(pot, v)).epsilon(1e-12));
  }
}

TEST_CASE("decomposition with a sign-changing theta2") {
  // θ = 1 + 0.3 cos 4φ: θ₂ = θ'' + (1+γ)²θ is negative near φ = 0
  const HomogeneousPotential pot(AngularProfile::cosine(1.0, 0.3, 4), 0.5);
  const PotentialDecomposition dec = decompose(pot);
  REQUIRE(dec.sup_theta2_negative > 0.0);
  CHECK(dec.p > 1.0);
  CHECK(dec.p < 4.0);
  for (double r : {0.1, 0.5, 0.9 * dec.z, 1.1 * dec.z, 3.0}) {
    for (double a = 0.0; a < 6.2; a += 0.7) {
      const Vector x = r * unit2(a);
      CHECK(dec.V1(x) >= 0.0);
      CHECK(dec.V2(x) >= 0.0);
      if (r > dec.z) CHECK(dec.V2(x) == 0.0);
      CHECK(dec.V1(x) - dec.V2(x) == doctest::Approx(eval_V(pot, x)).epsilon(1e-12));
    }
  }
  // ∫|V₂|^p over the plane: polar midpoint rule with r = z s², which removes
  // the r^{(γ−1)p} singularity; refinements must settle to a finite limit.
  auto integral = [&](int n) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double s = (i + 0.5) / n;
      const double r = dec.z * s * s;
      const double jac = 2 * dec.z * s / n * r;
      for (int k = 0; k < 4 * n; ++k) {
        const double a = 2 * std::numbers::pi * (k + 0.5) / (4 * n);
        sum += std::pow(dec.V2(r * unit2(a)), dec.p) * jac * (2 * std::numbers::pi / (4 * n));
      }
    }
    return sum;
  };
  const double i1 = integral(32), i2 = integral(64), i3 = integral(128);
  CHECK(std::isfinite(i3));
  CHECK(i3 > 0.0);
  CHECK(std::abs(i3 - i2) < std::abs(i2 - i1));
  CHECK(std::abs(i3 - i2) < 1e-2 * i3);
}

TEST_CASE("sphere meshes are unit vectors") {
  CHECK(sphere_mesh(1).size() == 2);
  for (int d : {2, 3})
    for (const Vector& w : sphere_mesh(d, 50)) CHECK(w.norm() == doctest::Approx(1.0).epsilon(1e-14));
}
