#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "peano/types.hpp"

namespace peano {

/// Angular factor θ of a homogeneous potential.
///
/// Every family is evaluated through its degree-0 homogeneous extension
/// θ(x) = θ(x/|x|), so gradient(y) is tangent to the sphere at unit y and
/// gradient(x) = gradient(x/|x|)/|x| off the sphere.
class AngularProfile {
 public:
  enum class Family { Isotropic, TwoSided, Cosine, Tabulated, Custom };

  using ValueFn = std::function<double(const Vector&)>;
  using GradFn = std::function<Vector(const Vector&)>;
  using HessFn = std::function<Matrix(const Vector&)>;

  /// θ ≡ c on the unit sphere of ℝ^dim.
  static AngularProfile isotropic(int dim, double c);
  /// d = 1 profile with θ(+1) = c_plus and θ(−1) = c_minus.
  static AngularProfile two_sided(double c_plus, double c_minus);
  /// d = 2 profile θ(cos φ, sin φ) = c0 + c1 cos(kφ), requires c0 > |c1|.
  static AngularProfile cosine(double c0, double c1, int k);
  /// d = 2 profile interpolated by a periodic cubic spline through (angle, value) nodes.
  static AngularProfile tabulated(std::vector<double> angles, std::vector<double> values);
  /// Reads a two-column "angle value" text file (radians, '#' comments allowed).
  static AngularProfile tabulated_from_file(const std::string& path);
  /// User-supplied extension; hessian may be omitted and is then differenced.
  static AngularProfile custom(int dim, ValueFn value, GradFn gradient, std::optional<HessFn> hessian = {});

  int dimension() const { return dim_; }
  Family family() const { return family_; }
  std::string family_name() const;
  /// Named parameters of the family, for manifests and summaries.
  const std::vector<std::pair<std::string, double>>& parameters() const { return params_; }

  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  /// Hessian of the degree-0 extension; numeric when the family has no closed form.
  Matrix hessian(const Vector& x) const;
  bool has_analytic_hessian() const { return family_ != Family::Custom || custom_hess_.has_value(); }

 private:
  AngularProfile() = default;

  struct Spline {
    std::vector<double> knots;    // ascending in [0, 2π)
    std::vector<double> values;
    std::vector<double> second;   // second derivatives at knots
    double eval(double phi, int derivative) const;
  };

  int dim_ = 1;
  Family family_ = Family::Isotropic;
  std::vector<std::pair<std::string, double>> params_;
  double c0_ = 1.0, c1_ = 0.0;
  int k_ = 0;
  std::optional<Spline> spline_;
  ValueFn custom_value_;
  GradFn custom_grad_;
  std::optional<HessFn> custom_hess_;

  // θ as a function of polar angle, with derivatives 0..2 (d = 2 families only).
  double polar(double phi, int derivative) const;
};

/// U(x) = θ(x/|x|)|x|^{1+γ} with U(0) = 0 and γ ∈ (0, 1).
class HomogeneousPotential {
 public:
  HomogeneousPotential(AngularProfile profile, double gamma);

  int dimension() const { return profile_.dimension(); }
  double gamma() const { return gamma_; }
  const AngularProfile& profile() const { return profile_; }

 private:
  AngularProfile profile_;
  double gamma_;
};

/// V = V1 − V2 with V1 ≥ 0 and V2 ≥ 0 supported in the ball of radius z.
struct PotentialDecomposition {
  double z = 0.0;
  double p = 0.0;
  double sup_theta2_negative = 0.0;
  double inf_theta1_squared = 0.0;
  std::function<double(const Vector&)> V1;
  std::function<double(const Vector&)> V2;
};

/// Points on the unit sphere used for sup/inf over directions: {−1, +1} for
/// d = 1, `count` uniform angles for d = 2 and a Fibonacci lattice for d ≥ 3.
std::vector<Vector> sphere_mesh(int dim, int count = 0);

double eval_U(const HomogeneousPotential& pot, const Vector& x);
Vector eval_drift(const HomogeneousPotential& pot, const Vector& x);

/// θ₁(y) with b(x) = θ₁(x/|x|)|x|^γ. Throws for |y| ≠ 1.
Vector theta1(const HomogeneousPotential& pot, const Vector& y);

/// θ₂(y) with ΔU(x) = θ₂(x/|x|)|x|^{γ−1}.
double theta2(const HomogeneousPotential& pot, const Vector& y);

/// div b(x) = ΔU(x); closed form from the profile Hessian, else central
/// differences of the drift with step 1e−5·max(|x|, 1).
double eval_divergence(const HomogeneousPotential& pot, const Vector& x);

/// V(x) = ½(|b(x)|² + div b(x)); singular at the origin.
double eval_V(const HomogeneousPotential& pot, const Vector& x);

/// Linear-growth constant a_∞ = sup_{|y|=1} |θ₁(y)|, so |b(x)| ≤ a_∞(|x| + 1).
double drift_bound(const HomogeneousPotential& pot, int mesh_count = 0);

PotentialDecomposition decompose(const HomogeneousPotential& pot, int mesh_count = 0);

/// Largest Frobenius norm of the profile Hessian over the sphere mesh.
double max_profile_hessian(const HomogeneousPotential& pot, int mesh_count = 0);

}  // namespace peano
