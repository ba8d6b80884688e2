#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "peano/characteristics.hpp"
#include "peano/sde.hpp"
#include "peano/spectral.hpp"

namespace peano {

struct DensityEstimate {
  double t = 0.0;
  Vector x;
  double p_hat = 0.0;
  double stderr_ = 0.0;
  Vector bandwidth;
  std::size_t n_paths = 0;
};

/// Silverman's rule per axis: 0.9·min(σ, IQR/1.34)·n^{−1/5} in d = 1 and
/// σ_a·(4/((d+2)n))^{1/(d+4)} otherwise.
Vector silverman_bandwidth(const Matrix& samples);

/// Gaussian product-kernel density at x; stderr from 16 contiguous batches.
/// bandwidth ≤ 0 selects Silverman's rule.
DensityEstimate kde(const Matrix& samples, const Vector& x, double bandwidth = 0.0);
DensityEstimate estimate_density(const PathEnsemble& ens, double t, const Vector& x, double bandwidth = 0.0);
/// Box-count fallback for diagnostics: fraction of samples in the cube of side `width` around x, per volume.
double histogram_density(const Matrix& samples, const Vector& x, double width);

struct MercerValue {
  double value = 0.0;
  double truncation_indicator = 1.0;  // e^{−(λ_{k+1}−λ₁)t}; 1 when λ_{k+1} is unknown
  double tail_bound = 0.0;            // rough bound on the omitted terms
};
/// Σ_{j ≤ k} e^{−λ_j t}ψ_j(x)ψ_j(y) with multilinear interpolation of ψ_j.
MercerValue mercer_sum(const SpectralResult& spec, double t, const Vector& x, const Vector& y, int k);

struct BridgeValue {
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t skipped_nodes = 0;
};
/// (2πt)^{−d/2}e^{−|x−y|²/2t}·E[exp(−∫₀ᵗ V(B_s)ds)] over Brownian bridges B from x to y
/// sampled at n_steps cells. In 1D a homogeneous V is split: the |x|^{2γ} part uses
/// the trapezoid rule and the |x|^{γ−1} part its exact conditional mean given the
/// cell endpoints. Otherwise the midpoint rule is used, skipping nodes with |B| < 1e−8.
BridgeValue fk_bridge(const HomogeneousPotential& pot, double t, const Vector& x, const Vector& y,
                      std::size_t n_samples, int n_steps = 2048, std::uint64_t seed = 1, int workers = 1);
BridgeValue fk_bridge(const PointFunction& V, double t, const Vector& x, const Vector& y, std::size_t n_samples,
                      int n_steps = 2048, std::uint64_t seed = 1, int workers = 1);

struct RepresentationReport {
  double kde = 0.0, kde_stderr = 0.0;
  double mercer = 0.0;           // the right-hand side at x
  double mercer_smoothed = 0.0;  // same, convolved with the KDE kernel
  double truncation_indicator = 0.0;
  double relative_deviation = 0.0;  // (kde − smoothed)/smoothed
  double combined_error = 0.0;      // absolute, statistical ⊕ truncation
  bool agree = false;
  std::vector<std::string> warnings;
};
/// KDE of simulated X^ε_t against (εε_γ^{1/2})^{−d}e^{U(y)}a_{t/ε_γ}(0, y), y = x/(εε_γ^{1/2}).
RepresentationReport density_representation_check(const HomogeneousPotential& pot, const SpectralResult& spec,
                                                  const SDEConfig& cfg, double t, const Vector& x, int workers = 1);
/// The right-hand side alone.
double mercer_density(const HomogeneousPotential& pot, const SpectralResult& spec, double epsilon, double t,
                      const Vector& x, double* truncation = nullptr);

struct RateTarget {
  double t = 1.0;
  Vector x;
};

struct RateRow {
  double epsilon = 0.0, epsilon_gamma = 0.0;
  double p_hat = 0.0, stderr_ = 0.0;
  double log_p = 0.0, eps_gamma_log_p = 0.0, eps2_log_p = 0.0;
  bool used = false;
};

struct RateFit {
  RateTarget target;
  std::vector<RateRow> rows;
  std::string regime;  // "second_order" (fitted) or "first_order" (outside the extremal envelope)
  double intercept = 0.0, slope = 0.0, intercept_se = 0.0, ci_low = 0.0, ci_high = 0.0;
  double r2 = 0.0, birge_ratio = 1.0;
  std::vector<double> residuals;
  double intercept_linear = 0.0;  // plain ε_γ log p̂ = a + b ε_γ, for comparison
  double expected = 0.0;          // −λ₁t − g(x)
  double relative_error = 0.0;
  bool diverging = false;  // first-order regime: ε_γ log p̂ keeps falling along the ladder
  std::vector<std::string> warnings;
};

/// Weighted fit of ε_γ log p̂ + ε_γ log ε_γ = A + Bε_γ (the ε_γ log ε_γ term is the
/// exactly known prefactor contribution); CI uses Student t scaled by the Birge ratio.
void fit_rate(RateFit& fit);

/// One ensemble per ladder rung, recorded at every target time. dt ≤ 0 selects
/// min(1e−4, ε_γ/50) on each rung.
std::vector<PathEnsemble> run_ladder(const HomogeneousPotential& pot, const std::vector<double>& ladder,
                                     const SDEConfig& base, const std::vector<double>& times, int workers = 1,
                                     double dt = 0.0);
std::vector<RateFit> rate_extract(const GFunction& gf, const std::vector<PathEnsemble>& ladder_runs,
                                  const std::vector<RateTarget>& targets);
std::vector<RateFit> rate_extract(const HomogeneousPotential& pot, const GFunction& gf,
                                  const std::vector<RateTarget>& targets, const std::vector<double>& ladder,
                                  const SDEConfig& base, int workers = 1, double dt = 0.0);

std::string rate_fit_json(const RateFit& fit);
void write_rate_csv(const RateFit& fit, const std::string& path);

double student_t_975(int dof);

}  // namespace peano
