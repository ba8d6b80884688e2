#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "peano/lanczos.hpp"
#include "peano/potential.hpp"

namespace peano {

using PointFunction = std::function<double(const Vector&)>;

/// Tensor grid on [−L, L]^d, axis 0 varying fastest in the flat index.
struct GridSpec {
  int d = 1;
  double L = 1.0;
  int n = 16;
  bool cell_centered = true;

  double h() const { return cell_centered ? 2.0 * L / n : 2.0 * L / (n + 1); }
  double coord(int i) const { return cell_centered ? -L + (i + 0.5) * h() : -L + (i + 1) * h(); }
  std::size_t size() const;
  Vector node(std::size_t flat) const;
  /// Throws unless d ∈ {1,2,3}, n ≥ 16 and L > 0; a cell-centered grid also needs even n.
  void validate() const;
};

/// Smallest L with e^{−U(L·e)} < tail for every sphere-mesh direction e.
double box_half_width(const HomogeneousPotential& pot, double tail = 1e-12);
GridSpec make_grid(const HomogeneousPotential& pot, int n, double tail = 1e-12);

/// −½Δ (Dirichlet, (2d+1)-point stencil) plus diagonal V on a grid.
struct SchrodingerOperator {
  GridSpec grid;
  SparseMatrix matrix;
  Vector diagonal_potential;

  Vector apply(const Vector& u) const { return matrix * u; }
};

inline constexpr std::size_t kDefaultMemoryCap = std::size_t{2} << 30;

/// Diagonal entries are cell averages of V: exact power integrals in d = 1,
/// tensor Gauss–Legendre in d ≥ 2 (finer near the origin). Point sampling of
/// the |x|^{γ−1} singularity would cost an order of grid convergence.
SchrodingerOperator assemble(const HomogeneousPotential& pot, const GridSpec& grid,
                             std::size_t memory_cap = kDefaultMemoryCap);
/// Generic potential sampled at the nodes.
SchrodingerOperator assemble(const PointFunction& V, const GridSpec& grid, std::size_t memory_cap = kDefaultMemoryCap);

struct SpectralResult {
  GridSpec grid;
  std::vector<double> eigenvalues;
  std::vector<Vector> eigenfunctions;  // Σψ²h^d = 1; ψ₁ > 0
  std::vector<double> residuals;       // ‖Hψ − λψ‖₂ in the same normalization
  int applications = 0;

  /// Multilinear interpolation of ψ_j (0-based j); throws out-of-grid outside the node hull.
  double interpolate(int j, const Vector& x) const;
};

SpectralResult bottom_spectrum(const SchrodingerOperator& op, int k, const EigenOptions& opt = {});

/// Ground energy of a 1D homogeneous potential by inward shooting from ±L and
/// log-derivative matching at the origin; bisection to `tol`.
double shoot_1d(const HomogeneousPotential& pot, double lambda_lo, double lambda_hi, double tol = 1e-10);
/// Same for a smooth 1D potential on [−L, L].
double shoot_1d(const PointFunction& V, double L, double lambda_lo, double lambda_hi, double tol = 1e-10);

struct BoundReport {
  double radius = 0.0;             // r = L/2
  std::vector<double> M;           // max_{|x| ≥ r} e^{U}|ψ_j|
  double max_M = 0.0;
  double bound = 0.0;              // configured C, default 10 × median M_j
  bool bounded = false;
  std::vector<double> profile_radii;
  std::vector<double> profile_max;  // max_j M_j(r) for growing r, non-increasing by construction
  // −log ψ₁ − U against g on |x| ∈ [L/2, 3L/4]
  bool decay_checked = false;
  double decay_max_rel_error = 0.0;
  bool decay_ok = false;
  double decay_fit_coefficient = 0.0;  // κ in −log ψ₁ − U ≈ a + b log|x| + κ g
  int decay_nodes = 0;
};

/// `g` may be empty, in which case the decay comparison is skipped.
BoundReport bound_check(const SpectralResult& res, const HomogeneousPotential& pot, const PointFunction& g = {},
                        double C = 0.0, double decay_tol = 0.1);

/// λ₁ at n and 2n plus the O(h²) Richardson value.
struct GridConvergence {
  double coarse = 0.0, fine = 0.0, richardson = 0.0, relative_change = 0.0;
};
GridConvergence grid_convergence(const HomogeneousPotential& pot, const GridSpec& grid, const EigenOptions& opt = {});

void write_spectrum_csv(const SpectralResult& res, const std::string& path);
std::string spectrum_summary_json(const SpectralResult& res);

}  // namespace peano
