#pragma once

#include <string>
#include <vector>

#include "peano/characteristics.hpp"
#include "peano/sde.hpp"

namespace peano {

/// A path on a uniform mesh t_k = k·dt, k = 0..n, starting at the origin.
struct DiscretePath {
  double dt = 0.0;
  std::vector<Vector> states;

  int steps() const { return static_cast<int>(states.size()) - 1; }
  double T() const { return dt * steps(); }
  double time(int k) const { return dt * k; }

  /// Rejects non-uniform meshes.
  static DiscretePath from_samples(const std::vector<double>& times, const std::vector<Vector>& states);
  static DiscretePath from_function(const std::function<Vector(double)>& phi, double T, int n);
  /// Recorded states of one ensemble path (the recording must be uniform).
  static DiscretePath from_ensemble(const PathEnsemble& ens, std::size_t path);
};

/// Non-negative real or +∞; the infinite case is a tag, never a sentinel.
class RateValue {
 public:
  static RateValue finite(double v) { return RateValue(false, v); }
  static RateValue infinity() { return RateValue(true, 0.0); }

  bool is_infinite() const { return infinite_; }
  /// Throws when infinite.
  double value() const;
  std::string str() const;

 private:
  RateValue(bool inf, double v) : infinite_(inf), value_(v) {}
  bool infinite_;
  double value_;
};

/// ½∫|φ̇ − b(φ)|² with central differences (second-order one-sided at the
/// ends) and the trapezoid rule; +∞ when an increment exceeds dt^{1/4}.
RateValue I1(const DiscretePath& path, const HomogeneousPotential& pot);

struct SolutionCheck {
  bool is_solution = false;
  double residual = 0.0;  // max over interior nodes of |φ̇ − b(φ)|
  double threshold = 0.0; // tol·(1 + max|b(φ)|)
  double t0 = 0.0;        // departure time from the origin
};
SolutionCheck is_ode_solution(const DiscretePath& path, const HomogeneousPotential& pot, double tol = 1e-3);

/// λ₁T + g(φ(T)) on solutions, +∞ otherwise.
RateValue I2(const DiscretePath& path, const HomogeneousPotential& pot, const GFunction& gf, double tol = 1e-3);

struct RateReport {
  std::size_t path_id = 0;
  RateValue i1 = RateValue::infinity();
  RateValue i2 = RateValue::infinity();
  SolutionCheck check;
};
std::vector<RateReport> evaluate_paths(const PathEnsemble& ens, const HomogeneousPotential& pot, const GFunction& gf,
                                       double tol = 1e-3, int workers = 1);
void write_rate_reports_csv(const std::vector<RateReport>& reports, const std::string& path);

struct AlphaEstimate {
  double t = 0.0, delta = 0.0;
  std::size_t n = 0;
  std::vector<double> weights;  // one per flow
  std::vector<double> stderr_;  // binomial
  double unclassified = 0.0;
  double unclassified_stderr = 0.0;
  double chi2 = 0.0;  // against equal weights (symmetry diagnostic)
  int dof = 0;
};
/// Fraction of paths within delta of each φ_i(t); throws when neighbourhoods overlap.
AlphaEstimate estimate_alpha(const PathEnsemble& ens, const std::vector<ExtremalFlow>& flows, double t, double delta);

}  // namespace peano
