#include "peano/characteristics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>

#include "peano/error.hpp"
#include "peano/parallel.hpp"

namespace peano {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Tangential part of ∇θ at unit ω.
Vector tangential_gradient(const AngularProfile& prof, const Vector& omega) {
  const Vector g = prof.gradient(omega);
  return g - g.dot(omega) * omega;
}

void require_unit(const Vector& omega, int d) {
  if (omega.size() != d) throw Error(ErrorKind::InvalidArgument, "direction has the wrong dimension");
  if (std::abs(omega.norm() - 1.0) > 1e-9) throw Error(ErrorKind::InvalidArgument, "direction must be a unit vector");
}

// Integrates dω/ds = sign·∇_Tθ/((1−γ)(1+γ)θ) for s ∈ [0, span], the angular
// equation in log-radius. With `weight` set, also accumulates ∫ e^{−s}/((1−γ)(1+γ)θ) ds.
std::pair<Vector, double> log_radius_flow(const HomogeneousPotential& pot, const Vector& omega, double sign,
                                          double span, bool weight) {
  const int d = pot.dimension();
  const double c = (1.0 - pot.gamma()) * (1.0 + pot.gamma());
  const AngularProfile& prof = pot.profile();
  Vector y(d + 1);
  y.head(d) = omega;
  y[d] = 0.0;
  auto rhs = [&](double s, const Vector& state) {
    const Vector w = state.head(d) / state.head(d).norm();
    const double th = prof.value(w);
    Vector f(d + 1);
    f.head(d) = sign * tangential_gradient(prof, w) / (c * th);
    f[d] = weight ? std::exp(-s) / (c * th) : 0.0;
    return f;
  };
  OdeOptions opt;
  opt.abs_tol = 1e-13;
  opt.rel_tol = 1e-11;
  const Vector out = dopri5(rhs, 0.0, y, span, opt);
  Vector w = out.head(d) / out.head(d).norm();
  double integral = out[d];
  if (weight) integral += std::exp(-span) / (c * prof.value(w));
  return {w, integral};
}

double polar_angle(const Vector& w) {
  double a = std::atan2(w[1], w[0]);
  if (a < 0) a += kTwoPi;
  return a;
}

}  // namespace

double seed_time(const HomogeneousPotential& pot, const Vector& omega0, double r0) {
  require_unit(omega0, pot.dimension());
  const double rho0 = std::pow(r0, 1.0 - pot.gamma());
  if (pot.dimension() == 1) return rho0 / ((1.0 - pot.gamma()) * (1.0 + pot.gamma()) * pot.profile().value(omega0));
  return rho0 * log_radius_flow(pot, omega0, -1.0, 60.0, true).second;
}

ExtremalFlow integrate_extremal(const HomogeneousPotential& pot, const Vector& omega0, double T,
                                const FlowOptions& opt) {
  const int d = pot.dimension();
  require_unit(omega0, d);
  if (!(opt.r0 > 0.0)) throw Error(ErrorKind::InvalidArgument, "seed radius must be positive");
  const double g = pot.gamma();
  const double c = (1.0 - g) * (1.0 + g);
  const AngularProfile& prof = pot.profile();

  ExtremalFlow flow;
  flow.omega0 = omega0;
  flow.gamma = g;
  flow.r0 = opt.r0;
  flow.t_seed = seed_time(pot, omega0, opt.r0);
  if (!(T > flow.t_seed)) throw Error(ErrorKind::InvalidArgument, "horizon must exceed the seed time");

  Vector y(d + 1);
  y[0] = std::pow(opt.r0, 1.0 - g);
  y.tail(d) = omega0;
  auto rhs = [&](double, const Vector& s) {
    const Vector w = s.tail(d) / s.tail(d).norm();
    Vector f(d + 1);
    f[0] = c * prof.value(w);
    f.tail(d) = tangential_gradient(prof, w) / s[0];
    if (!f.allFinite()) throw Error(ErrorKind::IntegrationFailure, "profile gradient is not finite along the flow");
    return f;
  };
  auto to_point = [&](const Vector& s) -> Vector {
    return std::pow(s[0], 1.0 / (1.0 - g)) * (s.tail(d) / s.tail(d).norm());
  };
  flow.times.push_back(flow.t_seed);
  flow.points.push_back(to_point(y));
  auto obs = [&](const OdeStep& st, Vector& s, Vector&) {
    s.tail(d) /= s.tail(d).norm();
    flow.steps.push_back(st);
    flow.times.push_back(st.t1);
    flow.points.push_back(to_point(s));
    return true;
  };
  dopri5(rhs, flow.t_seed, y, T, opt.ode, obs);
  return flow;
}

Vector ExtremalFlow::at(double t) const {
  const double g = gamma;
  if (t < 0.0 || t > times.back() * (1.0 + 1e-12))
    throw Error(ErrorKind::OutOfRange, "time outside the integrated flow");
  if (t <= t_seed) return std::pow(t / t_seed, 1.0 / (1.0 - g)) * r0 * omega0;
  auto it = std::lower_bound(steps.begin(), steps.end(), t, [](const OdeStep& s, double v) { return s.t1 < v; });
  if (it == steps.end()) it = std::prev(steps.end());
  const Vector s = it->interpolate(std::min(t, it->t1));
  const Eigen::Index d = s.size() - 1;
  return std::pow(s[0], 1.0 / (1.0 - g)) * (s.tail(d) / s.tail(d).norm());
}

double ExtremalFlow::time_at_radius(double r) const {
  const double g = gamma;
  if (r <= r0) return t_seed * std::pow(r / r0, 1.0 - g);
  const double rho = std::pow(r, 1.0 - g);
  auto it = std::lower_bound(steps.begin(), steps.end(), rho, [](const OdeStep& s, double v) { return s.y1[0] < v; });
  if (it == steps.end()) throw Error(ErrorKind::OutOfRange, "radius beyond the integrated flow");
  double lo = it->t0, hi = it->t1;
  for (int k = 0; k < 200 && hi - lo > 1e-15 * hi; ++k) {
    const double mid = 0.5 * (lo + hi);
    (it->interpolate(mid)[0] < rho ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<ExtremalFlow> flow_bundle(const HomogeneousPotential& pot, double T, int count, const FlowOptions& opt) {
  const int d = pot.dimension();
  std::vector<Vector> seeds;
  if (d == 2) {
    const int n = count > 0 ? count : 512;
    seeds = sphere_mesh(2, n);
  } else {
    seeds = sphere_mesh(d, count);
  }
  std::vector<ExtremalFlow> flows(seeds.size());
  parallel_for(seeds.size(), default_workers(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) flows[i] = integrate_extremal(pot, seeds[i], T, opt);
  });
  return flows;
}

GFunction::GFunction(const HomogeneousPotential& pot, double lambda1, std::vector<ExtremalFlow> flows)
    : pot_(pot), lambda1_(lambda1), flows_(std::move(flows)) {
  if (flows_.empty()) throw Error(ErrorKind::InvalidArgument, "g needs at least one extremal flow");
  const int d = pot_.dimension();
  const double g = pot_.gamma();
  for (const ExtremalFlow& f : flows_) {
    directions_.push_back(f.omega0);
    tau_.push_back(f.t_seed / std::pow(f.r0, 1.0 - g));
  }
  if (d == 2) {
    if (flows_.size() < 3) throw Error(ErrorKind::InvalidArgument, "d = 2 needs at least 3 flows");
    // (angle, t/ρ) along every flow; flows crowd toward the maxima of θ, where
    // τ has a cusp, so the seeds alone would under-resolve it there.
    std::vector<std::pair<double, double>> table;
    for (std::size_t i = 0; i < flows_.size(); ++i) {
      table.emplace_back(polar_angle(directions_[i]), tau_[i]);
      for (const OdeStep& st : flows_[i].steps)
        table.emplace_back(polar_angle(st.y1.tail(2) / st.y1.tail(2).norm()), st.t1 / st.y1[0]);
    }
    std::sort(table.begin(), table.end());
    for (const auto& [a, t] : table) {
      if (!angles_.empty() && a - angles_.back() < 1e-4) continue;
      angles_.push_back(a);
      table_tau_.push_back(t);
    }
    if (angles_.size() > 1 && angles_.front() + kTwoPi - angles_.back() < 1e-4) {
      angles_.pop_back();
      table_tau_.pop_back();
    }
    spacing_ = kTwoPi / static_cast<double>(flows_.size());
  } else if (d >= 3) {
    spacing_ = std::sqrt(4.0 * std::numbers::pi / static_cast<double>(directions_.size()));
  }
}

double GFunction::tau(const Vector& omega) const {
  const int d = pot_.dimension();
  if (d == 1) {
    for (std::size_t i = 0; i < directions_.size(); ++i)
      if ((directions_[i][0] > 0) == (omega[0] > 0)) return tau_[i];
    throw Error(ErrorKind::UnreachableDirection, "no extremal flow on this side of the origin");
  }
  if (d == 2) {
    const double a = polar_angle(omega);
    const long n = static_cast<long>(angles_.size());
    auto node = [&](long k) {  // periodic extension of the table
      const long m = ((k % n) + n) % n;
      const double shift = kTwoPi * static_cast<double>((k - m) / n);
      return std::pair<double, double>{angles_[m] + shift, table_tau_[m]};
    };
    const long hi = std::upper_bound(angles_.begin(), angles_.end(), a) - angles_.begin();
    const long lo = hi - 1;
    if (node(hi).first - node(lo).first > 2.5 * spacing_)
      throw Error(ErrorKind::UnreachableDirection, "direction falls in a gap of the flow bundle");
    if (n < 4) return node(lo).second;
    // cubic Lagrange through the two bracketing nodes and their neighbours
    double acc = 0.0;
    for (long i = lo - 1; i <= hi + 1; ++i) {
      const auto [xi, yi] = node(i);
      double w = 1.0;
      for (long j = lo - 1; j <= hi + 1; ++j)
        if (j != i) w *= (a - node(j).first) / (xi - node(j).first);
      acc += w * yi;
    }
    return acc;
  }
  // d = 3: inverse-distance weights over the nearest seeds
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t i = 0; i < directions_.size(); ++i)
    dist.emplace_back(std::acos(std::clamp(directions_[i].dot(omega), -1.0, 1.0)), i);
  const std::size_t k = std::min<std::size_t>(6, dist.size());
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
  if (dist[0].first > 1.5 * spacing_)
    throw Error(ErrorKind::UnreachableDirection, "no extremal flow near this direction");
  if (dist[0].first < 1e-12) return tau_[dist[0].second];
  double wsum = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double w = 1.0 / (dist[i].first * dist[i].first);
    wsum += w;
    acc += w * tau_[dist[i].second];
  }
  return acc / wsum;
}

GFunction build_g(const HomogeneousPotential& pot, double lambda1, double T, int count, const FlowOptions& opt) {
  return GFunction(pot, lambda1, flow_bundle(pot, T, count, opt));
}

double eval_g(const GFunction& gf, const Vector& x) {
  const double r = x.norm();
  if (r == 0.0) return 0.0;
  return -gf.lambda1() * gf.tau(x / r) * std::pow(r, 1.0 - gf.gamma());
}

Vector limiting_angle(const HomogeneousPotential& pot, const Vector& omega) {
  if (pot.dimension() == 1) return omega;
  return log_radius_flow(pot, omega, 1.0, 60.0, false).first;
}

double asymptotic_g(const GFunction& gf, const Vector& x) {
  const double r = x.norm();
  if (r == 0.0) throw Error(ErrorKind::SingularPoint, "asymptotic g needs x != 0");
  const Vector w = limiting_angle(gf.potential(), x / r);
  return -gf.lambda1() * std::pow(r, 1.0 - gf.gamma()) / ((1.0 + gf.gamma()) * gf.potential().profile().value(w));
}

PdeReport verify_pde(const GFunction& gf, const std::vector<Vector>& points) {
  PdeReport rep;
  for (const Vector& x : points) {
    const double h = 1e-5 * x.norm();
    Vector grad(x.size());
    for (Eigen::Index a = 0; a < x.size(); ++a) {
      Vector xp = x, xm = x;
      xp[a] += h;
      xm[a] -= h;
      grad[a] = (eval_g(gf, xp) - eval_g(gf, xm)) / (2.0 * h);
    }
    const double res = std::abs(eval_drift(gf.potential(), x).dot(grad) + gf.lambda1()) / gf.lambda1();
    rep.max_relative_residual = std::max(rep.max_relative_residual, res);
    ++rep.samples;
  }
  return rep;
}

void write_flow_csv(const ExtremalFlow& flow, const std::string& path, int samples) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out << std::setprecision(17) << "t";
  const Eigen::Index d = flow.omega0.size();
  for (Eigen::Index a = 0; a < d; ++a) out << ",x" << a;
  out << "\n";
  const double T = flow.times.back();
  for (int i = 0; i <= samples; ++i) {
    const double t = T * i / samples;
    const Vector p = flow.at(t);
    out << t;
    for (Eigen::Index a = 0; a < d; ++a) out << "," << p[a];
    out << "\n";
  }
}

void write_g_csv(const GFunction& gf, const std::string& path, double extent, int n) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out << std::setprecision(17);
  const int d = gf.potential().dimension();
  if (d == 1) {
    out << "x0,g\n";
    for (int i = 0; i < n; ++i) {
      const double x = -extent + 2.0 * extent * (i + 0.5) / n;
      out << x << "," << eval_g(gf, Vector::Constant(1, x)) << "\n";
    }
    return;
  }
  out << "x0,x1,g\n";
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      Vector x = Vector::Zero(d);
      x[0] = -extent + 2.0 * extent * (i + 0.5) / n;
      x[1] = -extent + 2.0 * extent * (j + 0.5) / n;
      out << x[0] << "," << x[1] << "," << eval_g(gf, x) << "\n";
    }
}

}  // namespace peano
