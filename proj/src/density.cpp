#include "peano/density.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "peano/parallel.hpp"

namespace peano {

namespace {

constexpr int kBatches = 16;
constexpr std::size_t kMinSamples = 256;

double quantile(std::vector<double> v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  std::nth_element(v.begin(), v.begin() + lo, v.end());
  const double a = v[lo];
  if (lo + 1 >= v.size()) return a;
  const double b = *std::min_element(v.begin() + lo + 1, v.end());
  return a + (pos - lo) * (b - a);
}

// Probabilists' Gauss–Hermite rule (weight φ(z)) by Golub–Welsch.
void gauss_hermite(int n, std::vector<double>& z, std::vector<double>& w) {
  Matrix J = Matrix::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Matrix> es(J);
  z.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    z[i] = es.eigenvalues()[i];
    w[i] = es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
  }
}

}  // namespace

Vector silverman_bandwidth(const Matrix& samples) {
  const auto n = static_cast<double>(samples.rows());
  const int d = static_cast<int>(samples.cols());
  Vector h(d);
  for (int a = 0; a < d; ++a) {
    const Vector col = samples.col(a);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().sum() / std::max(1.0, n - 1.0));
    if (d == 1) {
      std::vector<double> v(col.data(), col.data() + col.size());
      const double iqr = quantile(v, 0.75) - quantile(v, 0.25);
      const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
      h[a] = 0.9 * spread * std::pow(n, -0.2);
    } else {
      h[a] = sd * std::pow(4.0 / ((d + 2.0) * n), 1.0 / (d + 4.0));
    }
    if (!(h[a] > 0.0)) throw Error(ErrorKind::InsufficientSamples, "degenerate sample: zero spread on an axis");
  }
  return h;
}

DensityEstimate kde(const Matrix& samples, const Vector& x, double bandwidth) {
  const std::size_t n = samples.rows();
  const int d = static_cast<int>(samples.cols());
  if (n < kMinSamples)
    throw Error(ErrorKind::InsufficientSamples,
                "KDE needs at least " + std::to_string(kMinSamples) + " samples, got " + std::to_string(n));
  if (x.size() != d) throw Error(ErrorKind::InvalidArgument, "evaluation point has the wrong dimension");
  DensityEstimate est;
  est.x = x;
  est.n_paths = n;
  est.bandwidth = bandwidth > 0.0 ? Vector::Constant(d, bandwidth) : silverman_bandwidth(samples);
  const Vector inv = est.bandwidth.cwiseInverse();
  const double norm = std::pow(2.0 * std::numbers::pi, -0.5 * d) * inv.prod();

  std::vector<double> batch(kBatches, 0.0);
  std::vector<std::size_t> count(kBatches, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double q = 0.0;
    for (int a = 0; a < d; ++a) {
      const double u = (samples(i, a) - x[a]) * inv[a];
      q += u * u;
    }
    const std::size_t b = i * kBatches / n;
    batch[b] += q < 80.0 ? std::exp(-0.5 * q) : 0.0;
    ++count[b];
  }
  double total = 0.0;
  for (int b = 0; b < kBatches; ++b) {
    total += batch[b];
    batch[b] = norm * batch[b] / static_cast<double>(count[b]);
  }
  est.p_hat = norm * total / static_cast<double>(n);
  const double mean = std::accumulate(batch.begin(), batch.end(), 0.0) / kBatches;
  double var = 0.0;
  for (double v : batch) var += (v - mean) * (v - mean);
  est.stderr_ = std::sqrt(var / (kBatches - 1) / kBatches);
  return est;
}

DensityEstimate estimate_density(const PathEnsemble& ens, double t, const Vector& x, double bandwidth) {
  DensityEstimate est = kde(endpoint_slice(ens, t), x, bandwidth);
  est.t = t;
  return est;
}

double histogram_density(const Matrix& samples, const Vector& x, double width) {
  if (!(width > 0.0)) throw Error(ErrorKind::InvalidArgument, "histogram width must be positive");
  if (samples.rows() == 0) throw Error(ErrorKind::InsufficientSamples, "no samples");
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < samples.rows(); ++i)
    hits += ((samples.row(i).transpose() - x).cwiseAbs().maxCoeff() <= 0.5 * width);
  return static_cast<double>(hits) / static_cast<double>(samples.rows()) / std::pow(width, samples.cols());
}

MercerValue mercer_sum(const SpectralResult& spec, double t, const Vector& x, const Vector& y, int k) {
  const int avail = static_cast<int>(spec.eigenvalues.size());
  if (k < 1 || k > avail)
    throw Error(ErrorKind::InvalidArgument,
                "k = " + std::to_string(k) + " but " + std::to_string(avail) + " eigenpairs are available");
  MercerValue out;
  double amp = 0.0;
  for (int j = 0; j < k; ++j) {
    const double pp = spec.interpolate(j, x) * spec.interpolate(j, y);
    out.value += std::exp(-spec.eigenvalues[j] * t) * pp;
    amp = std::max(amp, std::abs(pp));
  }
  const double l1 = spec.eigenvalues[0];
  // Without λ_{k+1} the last known eigenvalue stands in (a conservative indicator).
  const double next = k < avail ? spec.eigenvalues[k] : spec.eigenvalues[k - 1];
  out.truncation_indicator = std::exp(-(next - l1) * t);
  const double gap = k > 1 ? (spec.eigenvalues[k - 1] - l1) / (k - 1) : 1.0;
  out.tail_bound = amp * std::exp(-next * t) / (1.0 - std::exp(-std::max(gap, 1e-12) * t));
  return out;
}

namespace {

BridgeValue summarize_bridge(const std::vector<double>& weight, const std::vector<std::size_t>& skipped, int d,
                             double t, const Vector& x, const Vector& y);

void check_bridge_args(int d, double t, const Vector& x, const Vector& y, std::size_t n_samples, int n_steps) {
  if (!(t > 0.0)) throw Error(ErrorKind::InvalidArgument, "bridge time must be positive");
  if (n_steps < 1 || n_samples < 2) throw Error(ErrorKind::InvalidArgument, "need n_steps >= 1 and n_samples >= 2");
  if (x.size() != d || y.size() != d) throw Error(ErrorKind::InvalidArgument, "endpoint dimension mismatch");
}

template <typename PotFn>
BridgeValue bridge_impl(PotFn V, int d, double t, const Vector& x, const Vector& y, std::size_t n_samples,
                        int n_steps, std::uint64_t seed, int workers) {
  check_bridge_args(d, t, x, y, n_samples, n_steps);
  const double ds = t / n_steps;
  const std::uint64_t key = path_key(seed);
  std::vector<double> weight(n_samples);
  std::vector<std::size_t> skipped(n_samples, 0);

  parallel_for(n_samples, workers, [&](std::size_t begin, std::size_t end) {
    std::vector<double> b(d);
    for (std::size_t i = begin; i < end; ++i) {
      PhiloxStream stream(key, i);
      for (int a = 0; a < d; ++a) b[a] = x[a];
      double s = 0.0, action = 0.0;
      for (int k = 0; k < n_steps; ++k) {
        const double s1 = (k + 0.5) * ds;
        const double frac = (s1 - s) / (t - s);
        const double sd = std::sqrt((s1 - s) * (t - s1) / (t - s));
        double r2 = 0.0;
        for (int a = 0; a < d; ++a) {
          b[a] += frac * (y[a] - b[a]) + sd * normal(stream);
          r2 += b[a] * b[a];
        }
        s = s1;
        if (r2 < 1e-16) {
          ++skipped[i];
          continue;
        }
        action += V(b.data()) * ds;
      }
      weight[i] = std::exp(-action);
    }
  });
  return summarize_bridge(weight, skipped, d, t, x, y);
}

BridgeValue summarize_bridge(const std::vector<double>& weight, const std::vector<std::size_t>& skipped, int d,
                             double t, const Vector& x, const Vector& y) {
  const double n = static_cast<double>(weight.size());
  const double mean = std::accumulate(weight.begin(), weight.end(), 0.0) / n;
  double var = 0.0;
  for (double w : weight) var += (w - mean) * (w - mean);
  var /= n - 1.0;
  const double gauss = std::pow(2.0 * std::numbers::pi * t, -0.5 * d) * std::exp(-(x - y).squaredNorm() / (2.0 * t));
  BridgeValue out;
  out.value = gauss * mean;
  out.stderr_ = gauss * std::sqrt(var / n);
  out.skipped_nodes = std::accumulate(skipped.begin(), skipped.end(), std::size_t{0});
  return out;
}

// Conditional mean, given the cell endpoints, of ∫ (B_s)₊^p ds with p = γ − 1
// over a Brownian-bridge cell. With B_{uh} = μ(u) + √h σ(u)Z, σ² = u(1 − u),
// and α, β the endpoints over √h, the mean is h^{1+p/2} F(α, β) where
// F(α, β) = ∫₀¹ σ^p M(μ̃/σ) du, μ̃ = α(1 − u) + βu and M(m) = E[(m + Z)₊^p].
// The spike of V at the origin is integrable but far too sharp for a
// pointwise rule on the cell; this leaves only the (second-order) Jensen gap.
class SingularCellMean {
 public:
  explicit SingularCellMean(double p) : p_(p) {
    // M on [−kM, kM] from ∫₀^∞ y^p φ(y − m) dy with y = w^{1/(p+1)}, which
    // removes the y^p singularity: M = ∫ φ(w^{1/(p+1)} − m) dw / (p + 1).
    const int n = static_cast<int>(2 * kM / kStep) + 1;
    table_.resize(n);
    const double e = 1.0 / (p + 1.0);
    for (int i = 0; i < n; ++i) {
      const double m = -kM + i * kStep;
      const double top = std::max(m + 12.0, 0.0);
      if (top == 0.0) continue;
      const double W = std::pow(top, p + 1.0);
      const int q = 4000;
      const double dw = W / q;
      double sum = 0.0;
      for (int k = 0; k <= q; ++k) {
        const double z = std::pow(k * dw, e) - m;
        const double f = std::exp(-0.5 * z * z);
        sum += (k == 0 || k == q ? 1.0 : (k % 2 ? 4.0 : 2.0)) * f;
      }
      table_[i] = sum * dw / 3.0 / std::sqrt(2.0 * std::numbers::pi) * e;
    }
    // tanh-sinh rule on (0, 1), keeping u and 1 − u separately
    for (int k = -kNodes; k <= kNodes; ++k) {
      const double t = k * kH;
      const double x = 0.5 * std::numbers::pi * std::sinh(t);
      const double u = 1.0 / (1.0 + std::exp(-2.0 * x)), v = 1.0 / (1.0 + std::exp(2.0 * x));
      const double w = kH * std::numbers::pi * std::cosh(t) * u * v;
      if (w < 1e-300) continue;
      u_.push_back(u);
      v_.push_back(v);
      w_.push_back(w * std::pow(u * v, 0.5 * p));
      a_.push_back(v / std::sqrt(u * v));
      b_.push_back(u / std::sqrt(u * v));
    }
    build_grid();
  }

  double M(double m) const {
    if (m <= -kM) return 0.0;
    if (m >= kM) {
      const double i2 = 1.0 / (m * m), p = p_;
      return std::pow(m, p) * (1.0 + 0.5 * p * (p - 1) * i2 + 0.125 * p * (p - 1) * (p - 2) * (p - 3) * i2 * i2);
    }
    // cubic (Catmull–Rom) interpolation
    const double pos = (m + kM) / kStep;
    const int i = std::clamp(static_cast<int>(pos), 1, static_cast<int>(table_.size()) - 3);
    const double s = pos - i;
    const double y0 = table_[i - 1], y1 = table_[i], y2 = table_[i + 1], y3 = table_[i + 2];
    return y1 + 0.5 * s * (y2 - y0 + s * (2 * y0 - 5 * y1 + 4 * y2 - y3 + s * (3 * (y1 - y2) + y3 - y0)));
  }

  // F(α, β) and F(−α, −β) together. Inside the table the values are
  // interpolated in ξ = sign(α)|α|^{1/2}, where the |α|^{p+2} kink at the
  // origin becomes smooth enough for bicubic lookup.
  void F(double alpha, double beta, double& plus, double& minus) const {
    if (std::abs(alpha) < kR * kR && std::abs(beta) < kR * kR) {
      const double xi = std::copysign(std::sqrt(std::abs(alpha)), alpha);
      const double eta = std::copysign(std::sqrt(std::abs(beta)), beta);
      plus = lookup(xi, eta);
      minus = lookup(-xi, -eta);
      return;
    }
    quadrature(alpha, beta, plus, minus);
  }

  void quadrature(double alpha, double beta, double& plus, double& minus) const {
    plus = minus = 0.0;
    for (std::size_t k = 0; k < w_.size(); ++k) {
      const double m = alpha * a_[k] + beta * b_[k];
      plus += w_[k] * M(m);
      minus += w_[k] * M(-m);
    }
  }

 private:
  static constexpr double kM = 10.0, kStep = 1.0 / 64.0, kH = 1.0 / 8.0;
  static constexpr int kNodes = 28;
  static constexpr double kR = 2.5, kGrid = 1.0 / 64.0;

  static double catmull_rom(const double* y, double s) {
    return y[1] + 0.5 * s * (y[2] - y[0] + s * (2 * y[0] - 5 * y[1] + 4 * y[2] - y[3] + s * (3 * (y[1] - y[2]) + y[3] - y[0])));
  }

  void build_grid() {
    // one pad node on each side for the cubic stencil
    n_ = static_cast<int>(std::lround(2 * kR / kGrid)) + 3;
    grid_.resize(static_cast<std::size_t>(n_) * n_);
    for (int i = 0; i < n_; ++i) {
      const double xi = -kR + (i - 1) * kGrid;
      for (int j = 0; j < n_; ++j) {
        const double eta = -kR + (j - 1) * kGrid;
        double fm;
        quadrature(std::copysign(xi * xi, xi), std::copysign(eta * eta, eta), grid_[i * n_ + j], fm);
      }
    }
  }

  double lookup(double xi, double eta) const {
    const double px = (xi + kR) / kGrid + 1.0, py = (eta + kR) / kGrid + 1.0;
    const int i = std::clamp(static_cast<int>(px), 1, n_ - 3), j = std::clamp(static_cast<int>(py), 1, n_ - 3);
    double r[4];
    for (int k = 0; k < 4; ++k) r[k] = catmull_rom(&grid_[static_cast<std::size_t>(i - 1 + k) * n_ + j - 1], py - j);
    return catmull_rom(r, px - i);
  }

  double p_;
  int n_ = 0;
  std::vector<double> table_, u_, v_, w_, a_, b_, grid_;
};

// Cells whose endpoints stay beyond kFar·√h on one side use the large-|m|
// expansion of the same mean instead of the quadrature.
constexpr double kFar = 4.0;

BridgeValue bridge_1d(const HomogeneousPotential& pot, double t, double x, double y, std::size_t n_samples,
                      int n_steps, std::uint64_t seed, int workers) {
  const Vector e = Vector::Constant(1, 1.0);
  const double g = pot.gamma(), p = g - 1.0;
  const double ap = theta1(pot, e).squaredNorm(), am = theta1(pot, -e).squaredNorm();
  const double cp = theta2(pot, e), cm = theta2(pot, -e);
  const SingularCellMean cell(p);
  const double h = t / n_steps;
  const double sh = std::sqrt(h), scale = std::pow(h, 1.0 + 0.5 * p);
  const double far = kFar * sh;
  const std::uint64_t key = path_key(seed);
  std::vector<double> weight(n_samples);
  std::vector<std::size_t> skipped(n_samples, 0);

  parallel_for(n_samples, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      PhiloxStream stream(key, i);
      double a = x, ra = std::pow(std::abs(a), g);  // |a|^γ
      double s = 0.0, action = 0.0;
      for (int k = 1; k <= n_steps; ++k) {
        const double s1 = k * h;
        const double b = k == n_steps ? y
                                       : a + (s1 - s) / (t - s) * (y - a) +
                                             std::sqrt((s1 - s) * (t - s1) / (t - s)) * normal(stream);
        const double rb = std::pow(std::abs(b), g);
        // ½A|x|^{2γ}: trapezoid
        action += 0.25 * h * ((a >= 0 ? ap : am) * ra * ra + (b >= 0 ? ap : am) * rb * rb);
        // ½C|x|^{γ−1}: conditional mean over the cell
        if (a * b > 0.0 && std::min(std::abs(a), std::abs(b)) > far) {
          const double da = std::abs(a), db = std::abs(b);
          const double r = db / da;
          // mean of |μ|^p along the chord, then the bridge-variance correction
          const double chord = std::abs(r - 1.0) > 1e-4 ? (rb - ra) / (g * (db - da))
                                                        : ra / da * (1.0 + 0.5 * p * (r - 1.0));
          const double mid = 0.5 * (da + db);
          const double q = h / (mid * mid);
          const double mean =
              chord * (1.0 + p * (p - 1.0) * q / 12.0 + p * (p - 1.0) * (p - 2.0) * (p - 3.0) * q * q / 240.0);
          action += 0.5 * h * (a > 0 ? cp : cm) * mean;
        } else {
          double fp, fm;
          cell.F(a / sh, b / sh, fp, fm);
          action += 0.5 * scale * (cp * fp + cm * fm);
        }
        a = b;
        ra = rb;
        s = s1;
      }
      weight[i] = std::exp(-action);
    }
  });
  return summarize_bridge(weight, skipped, 1, t, Vector::Constant(1, x), Vector::Constant(1, y));
}

}  // namespace

BridgeValue fk_bridge(const HomogeneousPotential& pot, double t, const Vector& x, const Vector& y,
                      std::size_t n_samples, int n_steps, std::uint64_t seed, int workers) {
  const int d = pot.dimension();
  if (d == 1) {
    check_bridge_args(1, t, x, y, n_samples, n_steps);
    return bridge_1d(pot, t, x[0], y[0], n_samples, n_steps, seed, workers);
  }
  return bridge_impl([&pot, d](const double* v) { return eval_V(pot, Eigen::Map<const Vector>(v, d)); }, d, t, x, y,
                     n_samples, n_steps, seed, workers);
}

BridgeValue fk_bridge(const PointFunction& V, double t, const Vector& x, const Vector& y, std::size_t n_samples,
                      int n_steps, std::uint64_t seed, int workers) {
  const int d = static_cast<int>(x.size());
  return bridge_impl([&V, d](const double* v) { return V(Eigen::Map<const Vector>(v, d)); }, d, t, x, y, n_samples,
                     n_steps, seed, workers);
}

double mercer_density(const HomogeneousPotential& pot, const SpectralResult& spec, double epsilon, double t,
                      const Vector& x, double* truncation) {
  const int d = pot.dimension();
  const double eg = epsilon_gamma(epsilon, pot.gamma());
  const double s = epsilon * std::sqrt(eg);
  const Vector y = x / s;
  const Vector origin = Vector::Zero(d);
  const MercerValue m = mercer_sum(spec, t / eg, origin, y, static_cast<int>(spec.eigenvalues.size()));
  if (truncation) *truncation = m.truncation_indicator;
  return std::pow(s, -d) * std::exp(eval_U(pot, y)) * m.value;
}

RepresentationReport density_representation_check(const HomogeneousPotential& pot, const SpectralResult& spec,
                                                  const SDEConfig& cfg, double t, const Vector& x, int workers) {
  const int d = pot.dimension();
  if (x.size() != d) throw Error(ErrorKind::InvalidArgument, "evaluation point has the wrong dimension");
  RepresentationReport rep;
  const double eg = epsilon_gamma(cfg.epsilon, pot.gamma());
  const double s = cfg.epsilon * std::sqrt(eg);
  if ((x / s).cwiseAbs().maxCoeff() >= spec.grid.L)
    throw Error(ErrorKind::OutOfGrid, "rescaled point x/(eps*eps_gamma^(1/2)) lies outside the spectral box (L = " +
                                          std::to_string(spec.grid.L) + "); use a larger L");
  if (t / eg < 0.1) rep.warnings.push_back("t/eps_gamma < 0.1: Mercer truncation unreliable at small diffusion time");

  SDEConfig run = cfg;
  run.T = t;
  run.record_stride = static_cast<int>(std::max(1L, std::lround(t / run.dt)));
  const PathEnsemble ens = simulate(pot, run, workers);
  const DensityEstimate est = estimate_density(ens, t, x);
  rep.kde = est.p_hat;
  rep.kde_stderr = est.stderr_;
  rep.mercer = mercer_density(pot, spec, cfg.epsilon, t, x, &rep.truncation_indicator);

  // E[p(x + hZ)] is what the KDE estimates.
  std::vector<double> z, w;
  gauss_hermite(d == 1 ? 24 : 12, z, w);
  const int m = static_cast<int>(z.size());
  long combos = 1;
  for (int a = 0; a < d; ++a) combos *= m;
  double smooth = 0.0;
  for (long c = 0; c < combos; ++c) {
    Vector p = x;
    double weight = 1.0;
    long rest = c;
    for (int a = 0; a < d; ++a) {
      const int i = static_cast<int>(rest % m);
      rest /= m;
      p[a] += est.bandwidth[a] * z[i];
      weight *= w[i];
    }
    double value = 0.0;
    try {
      value = mercer_density(pot, spec, cfg.epsilon, t, p);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::OutOfGrid) throw;
    }
    smooth += weight * value;
  }
  rep.mercer_smoothed = smooth;
  rep.relative_deviation = (rep.kde - smooth) / smooth;
  rep.combined_error = std::hypot(rep.kde_stderr, rep.truncation_indicator * std::abs(smooth));
  rep.agree = std::abs(rep.kde - smooth) <= 3.0 * rep.combined_error;
  return rep;
}

double student_t_975(int dof) {
  static const double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
                                 2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
                                 2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
  if (dof < 1) throw Error(ErrorKind::FitFailure, "no degrees of freedom left for a confidence interval");
  if (dof <= 30) return table[dof - 1];
  return 1.95996 + 2.4 / dof;
}

void fit_rate(RateFit& fit) {
  std::vector<const RateRow*> used;
  for (auto& row : fit.rows)
    if (row.used) used.push_back(&row);
  if (used.size() < 3)
    throw Error(ErrorKind::FitFailure,
                "only " + std::to_string(used.size()) + " usable ladder rows (need 3) at t = " +
                    std::to_string(fit.target.t));
  const auto n = static_cast<Eigen::Index>(used.size());
  Matrix X(n, 2);
  Vector Y(n), Ylin(n), W(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const RateRow& r = *used[i];
    X(i, 0) = 1.0;
    X(i, 1) = r.epsilon_gamma;
    Ylin[i] = r.eps_gamma_log_p;
    Y[i] = r.eps_gamma_log_p + r.epsilon_gamma * std::log(r.epsilon_gamma);
    const double sigma = r.epsilon_gamma * r.stderr_ / r.p_hat;
    W[i] = 1.0 / (sigma * sigma);
  }
  const Matrix XtW = X.transpose() * W.asDiagonal();
  const Matrix A = XtW * X;
  const Eigen::LDLT<Matrix> ldlt(A);
  const Vector beta = ldlt.solve(XtW * Y);
  const Matrix cov = ldlt.solve(Matrix::Identity(2, 2));
  fit.intercept = beta[0];
  fit.slope = beta[1];
  fit.intercept_linear = ldlt.solve(XtW * Ylin)[0];

  const Vector res = Y - X * beta;
  fit.residuals.assign(res.data(), res.data() + n);
  const double chi2 = (res.array().square() * W.array()).sum();
  const int dof = static_cast<int>(n) - 2;
  fit.birge_ratio = std::sqrt(chi2 / dof);
  const double ybar = (W.array() * Y.array()).sum() / W.sum();
  const double ss_tot = (W.array() * (Y.array() - ybar).square()).sum();
  fit.r2 = ss_tot > 0.0 ? 1.0 - chi2 / ss_tot : 1.0;
  fit.intercept_se = std::sqrt(cov(0, 0)) * std::max(1.0, fit.birge_ratio);
  const double q = student_t_975(dof);
  fit.ci_low = fit.intercept - q * fit.intercept_se;
  fit.ci_high = fit.intercept + q * fit.intercept_se;
  fit.relative_error =
      fit.expected != 0.0 ? std::abs(fit.intercept - fit.expected) / std::abs(fit.expected) : std::abs(fit.intercept);
}

std::vector<PathEnsemble> run_ladder(const HomogeneousPotential& pot, const std::vector<double>& ladder,
                                     const SDEConfig& base, const std::vector<double>& times, int workers,
                                     double dt_fixed) {
  if (ladder.size() < 4) throw Error(ErrorKind::InvalidArgument, "the epsilon ladder needs at least 4 values");
  for (std::size_t i = 1; i < ladder.size(); ++i)
    if (!(ladder[i] < ladder[i - 1])) throw Error(ErrorKind::InvalidArgument, "epsilon ladder must strictly decrease");
  if (times.empty()) throw Error(ErrorKind::InvalidArgument, "no target times");
  const double T = *std::max_element(times.begin(), times.end());
  std::vector<PathEnsemble> out;
  for (double eps : ladder) {
    SDEConfig cfg = base;
    cfg.epsilon = eps;
    cfg.T = T;
    cfg.dt = dt_fixed > 0.0 ? dt_fixed : default_dt(eps, pot.gamma());
    // record only the steps that land on target times
    const long n_steps = std::max(1L, std::lround(T / cfg.dt));
    const double dt = T / static_cast<double>(n_steps);
    long stride = n_steps;
    for (double t : times) {
      const long k = std::lround(t / dt);
      if (std::abs(k * dt - t) > 1e-9 * T)
        throw Error(ErrorKind::InvalidArgument, "target time " + std::to_string(t) + " is not on the time mesh");
      stride = std::gcd(stride, k);
    }
    cfg.record_stride = static_cast<int>(std::max(1L, stride));
    out.push_back(simulate(pot, cfg, workers));
  }
  return out;
}

std::vector<RateFit> rate_extract(const GFunction& gf, const std::vector<PathEnsemble>& ladder_runs,
                                  const std::vector<RateTarget>& targets) {
  const double gamma = gf.gamma();
  const double l1 = gf.lambda1();
  std::vector<RateFit> fits;
  for (const RateTarget& target : targets) {
    RateFit fit;
    fit.target = target;
    const double cost = -eval_g(gf, target.x) / l1;  // time the extremal needs to reach x
    fit.expected = -l1 * target.t - eval_g(gf, target.x);
    fit.regime = cost <= target.t * (1.0 + 1e-6) ? "second_order" : "first_order";
    for (const PathEnsemble& ens : ladder_runs) {
      const DensityEstimate est = estimate_density(ens, target.t, target.x);
      RateRow row;
      row.epsilon = ens.config.epsilon;
      row.epsilon_gamma = epsilon_gamma(row.epsilon, gamma);
      row.p_hat = est.p_hat;
      row.stderr_ = est.stderr_;
      row.used = est.p_hat > est.stderr_;
      row.log_p = row.used ? std::log(est.p_hat) : -std::numeric_limits<double>::infinity();
      row.eps_gamma_log_p = row.epsilon_gamma * row.log_p;
      row.eps2_log_p = row.epsilon * row.epsilon * row.log_p;
      if (!row.used)
        fit.warnings.push_back("eps = " + std::to_string(row.epsilon) + ": p_hat <= stderr, row dropped");
      fit.rows.push_back(row);
    }
    if (fit.regime == "first_order") {
      // Not fitted: the rate lives at speed ε⁻², so ε_γ log p̂ should keep falling.
      fit.diverging = true;
      double prev = std::numeric_limits<double>::infinity();
      for (const RateRow& r : fit.rows) {
        if (r.used && !(r.eps_gamma_log_p < prev)) fit.diverging = false;
        if (r.used) prev = r.eps_gamma_log_p;
      }
    } else {
      fit_rate(fit);
    }
    fits.push_back(std::move(fit));
  }
  return fits;
}

std::vector<RateFit> rate_extract(const HomogeneousPotential& pot, const GFunction& gf,
                                  const std::vector<RateTarget>& targets, const std::vector<double>& ladder,
                                  const SDEConfig& base, int workers, double dt) {
  std::vector<double> times;
  for (const auto& t : targets) times.push_back(t.t);
  return rate_extract(gf, run_ladder(pot, ladder, base, times, workers, dt), targets);
}

std::string rate_fit_json(const RateFit& fit) {
  nlohmann::ordered_json j;
  j["t"] = fit.target.t;
  j["x"] = std::vector<double>(fit.target.x.data(), fit.target.x.data() + fit.target.x.size());
  j["regime"] = fit.regime;
  j["expected"] = fit.expected;
  if (fit.regime == "second_order") {
    j["intercept"] = fit.intercept;
    j["intercept_se"] = fit.intercept_se;
    j["ci95"] = {fit.ci_low, fit.ci_high};
    j["slope"] = fit.slope;
    j["r2"] = fit.r2;
    j["birge_ratio"] = fit.birge_ratio;
    j["residuals"] = fit.residuals;
    j["intercept_linear_model"] = fit.intercept_linear;
    j["relative_error"] = fit.relative_error;
  } else {
    j["diverging"] = fit.diverging;
  }
  j["warnings"] = fit.warnings;
  return j.dump(2);
}

void write_rate_csv(const RateFit& fit, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out << std::setprecision(17) << "epsilon,epsilon_gamma,p_hat,stderr,log_p,eps_gamma_log_p,eps2_log_p,used\n";
  for (const RateRow& r : fit.rows)
    out << r.epsilon << ',' << r.epsilon_gamma << ',' << r.p_hat << ',' << r.stderr_ << ',' << r.log_p << ','
        << r.eps_gamma_log_p << ',' << r.eps2_log_p << ',' << (r.used ? 1 : 0) << '\n';
}

}  // namespace peano
