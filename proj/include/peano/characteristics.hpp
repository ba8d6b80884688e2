#pragma once

#include <string>
#include <vector>

#include "peano/ode.hpp"
#include "peano/potential.hpp"

namespace peano {

/// An extremal solution of ẋ = b(x) leaving the origin at t = 0.
///
/// Integrated in (ρ, ω) with ρ = r^{1−γ}, for which ρ̇ = (1−γ)(1+γ)θ(ω) is
/// bounded and exactly linear for constant θ.
struct ExtremalFlow {
  Vector omega0;             // angle at the seed radius
  double gamma = 0.5;
  double r0 = 1e-6;
  double t_seed = 0.0;
  std::vector<double> times;
  std::vector<Vector> points;
  std::vector<OdeStep> steps;  // state (ρ, ω) on each accepted step

  /// φ₀(t) for t ∈ [0, times.back()]; points inside the seed ball are
  /// reconstructed by homogeneity.
  Vector at(double t) const;
  /// First time at which |φ₀| reaches r (throws out-of-range beyond the flow).
  double time_at_radius(double r) const;
};

struct FlowOptions {
  double r0 = 1e-6;
  OdeOptions ode{};
};

ExtremalFlow integrate_extremal(const HomogeneousPotential& pot, const Vector& omega0, double T,
                                const FlowOptions& opt = {});

/// Time needed by the extremal through r0·ω₀ to come out of the origin,
/// from the backward log-radius system. Equals r0^{1−γ}/((1−γ)(1+γ)θ(ω₀)) when θ is constant.
double seed_time(const HomogeneousPotential& pot, const Vector& omega0, double r0);

/// g with ⟨∇U, ∇g⟩ = −λ₁ and g(0) = 0, built from a bundle of extremal flows.
///
/// Along every extremal t/r^{1−γ} depends only on the current angle, so g(x) =
/// −λ₁ τ(x/|x|) |x|^{1−γ}, with τ tabulated from (angle, t/|φ₀|^{1−γ}) along the
/// flows; by homogeneity every sample is valid at any radius. In d = 2 the
/// samples crowd toward the maxima of θ, where τ has a cusp.
class GFunction {
 public:
  GFunction(const HomogeneousPotential& pot, double lambda1, std::vector<ExtremalFlow> flows);

  double lambda1() const { return lambda1_; }
  double gamma() const { return pot_.gamma(); }
  const std::vector<ExtremalFlow>& flows() const { return flows_; }
  const HomogeneousPotential& potential() const { return pot_; }

  /// τ(ω) = t/|x|^{1−γ} on the extremal through direction ω.
  double tau(const Vector& omega) const;

 private:
  HomogeneousPotential pot_;
  double lambda1_;
  std::vector<ExtremalFlow> flows_;
  std::vector<Vector> directions_;  // seed angles of the flows
  std::vector<double> tau_;
  std::vector<double> angles_;       // d = 2: ascending polar angles of the τ table
  std::vector<double> table_tau_;
  double spacing_ = 0.0;             // typical angular distance between seeds
};

/// Flows on the default departure mesh: ±1 in d = 1, 512 angles in d = 2,
/// the Fibonacci lattice (count) in d = 3.
std::vector<ExtremalFlow> flow_bundle(const HomogeneousPotential& pot, double T, int count = 0,
                                      const FlowOptions& opt = {});
GFunction build_g(const HomogeneousPotential& pot, double lambda1, double T = 1.0, int count = 0,
                  const FlowOptions& opt = {});

double eval_g(const GFunction& gf, const Vector& x);
/// −λ₁|x|^{1−γ}/((1+γ)θ(ω_∞)), ω_∞ the limiting angle of the extremal through x.
double asymptotic_g(const GFunction& gf, const Vector& x);
/// Limiting angle of the extremal through direction ω (forward in log-radius).
Vector limiting_angle(const HomogeneousPotential& pot, const Vector& omega);

struct PdeReport {
  double max_relative_residual = 0.0;
  int samples = 0;
};
/// max |⟨∇U, ∇g⟩ + λ₁|/λ₁ with ∇g by central differences of eval_g.
PdeReport verify_pde(const GFunction& gf, const std::vector<Vector>& points);

void write_flow_csv(const ExtremalFlow& flow, const std::string& path, int samples = 200);
void write_g_csv(const GFunction& gf, const std::string& path, double extent, int n);

}  // namespace peano
