#include "peano/rates.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "peano/parallel.hpp"

namespace peano {

namespace {

constexpr int kMinSteps = 64;

void require_mesh(const DiscretePath& path) {
  if (!(path.dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "path mesh step must be positive");
  if (path.steps() < kMinSteps)
    throw Error(ErrorKind::InvalidArgument,
                "path needs at least " + std::to_string(kMinSteps) + " steps, got " + std::to_string(path.steps()));
}

Vector drift_at(const HomogeneousPotential& pot, const Vector& x) {
  if (x.norm() == 0.0) return Vector::Zero(x.size());
  return eval_drift(pot, x);
}

// φ̇ at every node: central inside, second-order one-sided at both ends.
std::vector<Vector> derivative(const DiscretePath& p) {
  const int n = p.steps();
  const double h = p.dt;
  std::vector<Vector> v(n + 1);
  v[0] = (-3.0 * p.states[0] + 4.0 * p.states[1] - p.states[2]) / (2.0 * h);
  v[n] = (3.0 * p.states[n] - 4.0 * p.states[n - 1] + p.states[n - 2]) / (2.0 * h);
  for (int k = 1; k < n; ++k) v[k] = (p.states[k + 1] - p.states[k - 1]) / (2.0 * h);
  return v;
}

double theta_max(const HomogeneousPotential& pot) {
  double m = 0.0;
  for (const Vector& w : sphere_mesh(pot.dimension())) m = std::max(m, pot.profile().value(w));
  return m;
}

RateValue I2_given(const DiscretePath& path, const GFunction& gf, const SolutionCheck& check) {
  if (!check.is_solution) return RateValue::infinity();
  const double v = gf.lambda1() * path.T() + eval_g(gf, path.states.back());
  return RateValue::finite(std::max(v, 0.0));
}

}  // namespace

DiscretePath DiscretePath::from_samples(const std::vector<double>& times, const std::vector<Vector>& states) {
  if (times.size() != states.size() || times.size() < 2)
    throw Error(ErrorKind::InvalidArgument, "times and states must have the same length (>= 2)");
  if (times.front() != 0.0) throw Error(ErrorKind::InvalidArgument, "path must start at t = 0");
  DiscretePath p;
  p.dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  for (std::size_t k = 1; k < times.size(); ++k)
    if (std::abs(times[k] - times[k - 1] - p.dt) > 1e-9 * p.dt)
      throw Error(ErrorKind::InvalidArgument, "non-uniform mesh at index " + std::to_string(k));
  p.states = states;
  return p;
}

DiscretePath DiscretePath::from_function(const std::function<Vector(double)>& phi, double T, int n) {
  if (n < 1 || !(T > 0.0)) throw Error(ErrorKind::InvalidArgument, "need T > 0 and n >= 1");
  DiscretePath p;
  p.dt = T / n;
  for (int k = 0; k <= n; ++k) p.states.push_back(phi(k == n ? T : k * p.dt));
  return p;
}

DiscretePath DiscretePath::from_ensemble(const PathEnsemble& ens, std::size_t path) {
  std::vector<double> times;
  std::vector<Vector> states;
  for (std::size_t r = 0; r < ens.records(); ++r) {
    times.push_back(ens.time(r));
    states.push_back(Eigen::Map<const Vector>(ens.state(path, r), ens.d));
  }
  return from_samples(times, states);
}

double RateValue::value() const {
  if (infinite_) throw Error(ErrorKind::InvalidArgument, "rate value is +inf");
  return value_;
}

std::string RateValue::str() const {
  if (infinite_) return "inf";
  std::ostringstream s;
  s << std::setprecision(17) << value_;
  return s.str();
}

RateValue I1(const DiscretePath& path, const HomogeneousPotential& pot) {
  require_mesh(path);
  const int n = path.steps();
  const double cap = std::pow(path.dt, 0.25);
  for (int k = 0; k < n; ++k)
    if ((path.states[k + 1] - path.states[k]).norm() > cap) return RateValue::infinity();
  const std::vector<Vector> v = derivative(path);
  double sum = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double f = (v[k] - drift_at(pot, path.states[k])).squaredNorm();
    sum += (k == 0 || k == n) ? 0.5 * f : f;
  }
  return RateValue::finite(0.5 * path.dt * sum);
}

SolutionCheck is_ode_solution(const DiscretePath& path, const HomogeneousPotential& pot, double tol) {
  require_mesh(path);
  const int n = path.steps();
  const double g = pot.gamma();
  const std::vector<Vector> v = derivative(path);
  SolutionCheck out;
  double bmax = 0.0;
  for (int k = 0; k <= n; ++k) {
    const Vector b = drift_at(pot, path.states[k]);
    bmax = std::max(bmax, b.norm());
    if (k > 0 && k < n) out.residual = std::max(out.residual, (v[k] - b).norm());
  }
  out.threshold = tol * (1.0 + bmax);
  out.is_solution = out.residual <= out.threshold;

  // First node clearly off the origin, then back out the departure time along
  // the extremal through that node (exact for constant θ).
  const double c = (1.0 - g) * (1.0 + g);
  const double r_min = std::pow(c * theta_max(pot) * path.dt, 1.0 / (1.0 - g));
  out.t0 = path.T();
  for (int k = 0; k <= n; ++k) {
    const double r = path.states[k].norm();
    if (r > r_min) {
      const double th = pot.profile().value(path.states[k] / r);
      out.t0 = std::clamp(path.time(k) - std::pow(r, 1.0 - g) / (c * th), 0.0, path.time(k));
      break;
    }
  }
  return out;
}

RateValue I2(const DiscretePath& path, const HomogeneousPotential& pot, const GFunction& gf, double tol) {
  return I2_given(path, gf, is_ode_solution(path, pot, tol));
}

std::vector<RateReport> evaluate_paths(const PathEnsemble& ens, const HomogeneousPotential& pot, const GFunction& gf,
                                       double tol, int workers) {
  std::vector<RateReport> out(ens.valid.size());
  parallel_for(out.size(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      out[p].path_id = p;
      if (!ens.valid[p]) continue;
      const DiscretePath path = DiscretePath::from_ensemble(ens, p);
      out[p].i1 = I1(path, pot);
      out[p].check = is_ode_solution(path, pot, tol);
      out[p].i2 = I2_given(path, gf, out[p].check);
    }
  });
  return out;
}

void write_rate_reports_csv(const std::vector<RateReport>& reports, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out << std::setprecision(17) << "path_id,I1,I2,residual,t0,classification\n";
  for (const RateReport& r : reports)
    out << r.path_id << ',' << r.i1.str() << ',' << r.i2.str() << ',' << r.check.residual << ',' << r.check.t0 << ','
        << (r.check.is_solution ? "solution" : "non_solution") << '\n';
}

AlphaEstimate estimate_alpha(const PathEnsemble& ens, const std::vector<ExtremalFlow>& flows, double t, double delta) {
  if (flows.empty()) throw Error(ErrorKind::InvalidArgument, "no extremal flows given");
  if (!(delta > 0.0)) throw Error(ErrorKind::InvalidArgument, "delta must be positive");
  std::vector<Vector> centres;
  for (const auto& f : flows) centres.push_back(f.at(t));
  for (std::size_t i = 0; i < centres.size(); ++i)
    for (std::size_t j = i + 1; j < centres.size(); ++j)
      if ((centres[i] - centres[j]).norm() <= 2.0 * delta)
        throw Error(ErrorKind::InvalidArgument, "delta-neighbourhoods of flows " + std::to_string(i) + " and " +
                                                    std::to_string(j) + " overlap; use a smaller delta");
  const Matrix X = endpoint_slice(ens, t);
  AlphaEstimate a;
  a.t = t;
  a.delta = delta;
  a.n = X.rows();
  if (a.n == 0) throw Error(ErrorKind::InsufficientSamples, "no valid paths");
  std::vector<std::size_t> hits(centres.size(), 0);
  for (Eigen::Index p = 0; p < X.rows(); ++p) {
    const Vector x = X.row(p).transpose();
    for (std::size_t i = 0; i < centres.size(); ++i)
      if ((x - centres[i]).norm() <= delta) {
        ++hits[i];
        break;
      }
  }
  const double n = static_cast<double>(a.n);
  std::size_t classified = 0;
  for (std::size_t h : hits) {
    const double w = static_cast<double>(h) / n;
    a.weights.push_back(w);
    a.stderr_.push_back(std::sqrt(w * (1.0 - w) / n));
    classified += h;
  }
  a.unclassified = 1.0 - static_cast<double>(classified) / n;
  a.unclassified_stderr = std::sqrt(a.unclassified * (1.0 - a.unclassified) / n);
  const double expect = static_cast<double>(classified) / static_cast<double>(hits.size());
  if (expect > 0.0)
    for (std::size_t h : hits) a.chi2 += (static_cast<double>(h) - expect) * (static_cast<double>(h) - expect) / expect;
  a.dof = static_cast<int>(hits.size()) - 1;
  return a;
}

}  // namespace peano
