#include "peano/potential.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "peano/error.hpp"

namespace peano {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double phi, double origin) {
  double t = std::fmod(phi - origin, kTwoPi);
  if (t < 0.0) t += kTwoPi;
  return origin + t;
}

// Solves a cyclic tridiagonal system (Sherman–Morrison around the Thomas algorithm).
std::vector<double> solve_cyclic(const std::vector<double>& sub, const std::vector<double>& diag,
                                 const std::vector<double>& sup, double corner_low, double corner_high,
                                 const std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  auto thomas = [&](std::vector<double> b, const std::vector<double>& r) {
    std::vector<double> c(n), d(n), x(n);
    c[0] = sup[0] / b[0];
    d[0] = r[0] / b[0];
    for (std::size_t i = 1; i < n; ++i) {
      const double m = b[i] - sub[i] * c[i - 1];
      c[i] = sup[i] / m;
      d[i] = (r[i] - sub[i] * d[i - 1]) / m;
    }
    x[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = d[i] - c[i] * x[i + 1];
    return x;
  };
  const double g = -diag[0];
  std::vector<double> b = diag;
  b[0] -= g;
  b[n - 1] -= corner_low * corner_high / g;
  std::vector<double> x = thomas(b, rhs);
  std::vector<double> u(n, 0.0);
  u[0] = g;
  u[n - 1] = corner_low;
  std::vector<double> z = thomas(b, u);
  const double fact = (x[0] + corner_high * x[n - 1] / g) / (1.0 + z[0] + corner_high * z[n - 1] / g);
  for (std::size_t i = 0; i < n; ++i) x[i] -= fact * z[i];
  return x;
}

}  // namespace

double AngularProfile::Spline::eval(double phi, int derivative) const {
  const std::size_t n = knots.size();
  const double t = wrap_angle(phi, knots.front());
  std::size_t i = static_cast<std::size_t>(std::upper_bound(knots.begin(), knots.end(), t) - knots.begin());
  i = (i == 0) ? 0 : i - 1;
  const std::size_t j = (i + 1) % n;
  const double x0 = knots[i];
  const double x1 = (j == 0) ? knots.front() + kTwoPi : knots[j];
  const double h = x1 - x0;
  const double a = (x1 - t) / h;
  const double b = (t - x0) / h;
  const double y0 = values[i], y1 = values[j], m0 = second[i], m1 = second[j];
  switch (derivative) {
    case 0:
      return a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
    case 1:
      return (y1 - y0) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0 + (3.0 * b * b - 1.0) * h * m1 / 6.0;
    default:
      return a * m0 + b * m1;
  }
}

AngularProfile AngularProfile::isotropic(int dim, double c) {
  if (dim < 1) throw Error(ErrorKind::InvalidArgument, "profile dimension must be >= 1");
  if (!(c > 0.0)) throw Error(ErrorKind::ProfileInvalid, "isotropic constant must be positive");
  AngularProfile p;
  p.dim_ = dim;
  p.family_ = Family::Isotropic;
  p.c0_ = c;
  p.params_ = {{"c", c}};
  return p;
}

AngularProfile AngularProfile::two_sided(double c_plus, double c_minus) {
  if (!(c_plus > 0.0) || !(c_minus > 0.0))
    throw Error(ErrorKind::ProfileInvalid, "two-sided profile values must be positive");
  AngularProfile p;
  p.dim_ = 1;
  p.family_ = Family::TwoSided;
  p.c0_ = c_plus;
  p.c1_ = c_minus;
  p.params_ = {{"c_plus", c_plus}, {"c_minus", c_minus}};
  return p;
}

AngularProfile AngularProfile::cosine(double c0, double c1, int k) {
  if (!(c0 > std::abs(c1))) throw Error(ErrorKind::ProfileInvalid, "cosine profile needs c0 > |c1|");
  if (k < 0) throw Error(ErrorKind::InvalidArgument, "cosine profile needs k >= 0");
  AngularProfile p;
  p.dim_ = 2;
  p.family_ = Family::Cosine;
  p.c0_ = c0;
  p.c1_ = c1;
  p.k_ = k;
  p.params_ = {{"c0", c0}, {"c1", c1}, {"k", static_cast<double>(k)}};
  return p;
}

AngularProfile AngularProfile::tabulated(std::vector<double> angles, std::vector<double> values) {
  if (angles.size() != values.size() || angles.size() < 3)
    throw Error(ErrorKind::InvalidArgument, "tabulated profile needs >= 3 (angle, value) pairs");
  std::vector<std::pair<double, double>> nodes;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    if (!(values[i] > 0.0)) throw Error(ErrorKind::ProfileInvalid, "tabulated profile values must be positive");
    nodes.emplace_back(wrap_angle(angles[i], 0.0), values[i]);
  }
  std::sort(nodes.begin(), nodes.end());
  for (std::size_t i = 1; i < nodes.size(); ++i)
    if (nodes[i].first - nodes[i - 1].first < 1e-12)
      throw Error(ErrorKind::InvalidArgument, "tabulated profile has duplicate angles");

  Spline s;
  const std::size_t n = nodes.size();
  for (auto& [a, v] : nodes) {
    s.knots.push_back(a);
    s.values.push_back(v);
  }
  auto gap = [&](std::size_t i) {  // h_i = x_{i+1} − x_i with wrap-around
    return (i + 1 < n) ? s.knots[i + 1] - s.knots[i] : s.knots[0] + kTwoPi - s.knots[n - 1];
  };
  std::vector<double> sub(n), diag(n), sup(n), rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t prev = (i + n - 1) % n, next = (i + 1) % n;
    const double hp = gap(prev), hi = gap(i);
    sub[i] = hp;
    diag[i] = 2.0 * (hp + hi);
    sup[i] = hi;
    rhs[i] = 6.0 * ((s.values[next] - s.values[i]) / hi - (s.values[i] - s.values[prev]) / hp);
  }
  s.second = solve_cyclic(sub, diag, sup, gap(n - 1), gap(n - 1), rhs);

  AngularProfile p;
  p.dim_ = 2;
  p.family_ = Family::Tabulated;
  p.spline_ = std::move(s);
  p.params_ = {{"nodes", static_cast<double>(n)}};
  for (int i = 0; i < 720; ++i) {
    const double phi = kTwoPi * i / 720.0;
    if (!(p.polar(phi, 0) > 0.0))
      throw Error(ErrorKind::ProfileInvalid, "tabulated profile spline is not positive everywhere");
  }
  return p;
}

AngularProfile AngularProfile::tabulated_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open profile table '" + path + "'");
  std::vector<double> angles, values;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double a, v;
    if (row >> a >> v) {
      angles.push_back(a);
      values.push_back(v);
    }
  }
  return tabulated(std::move(angles), std::move(values));
}

AngularProfile AngularProfile::custom(int dim, ValueFn value, GradFn gradient, std::optional<HessFn> hessian) {
  if (dim < 1) throw Error(ErrorKind::InvalidArgument, "profile dimension must be >= 1");
  AngularProfile p;
  p.dim_ = dim;
  p.family_ = Family::Custom;
  p.custom_value_ = std::move(value);
  p.custom_grad_ = std::move(gradient);
  p.custom_hess_ = std::move(hessian);
  return p;
}

std::string AngularProfile::family_name() const {
  switch (family_) {
    case Family::Isotropic: return "isotropic";
    case Family::TwoSided: return "two_sided";
    case Family::Cosine: return "cosine";
    case Family::Tabulated: return "tabulated";
    case Family::Custom: return "custom";
  }
  return "custom";
}

double AngularProfile::polar(double phi, int derivative) const {
  if (family_ == Family::Cosine) {
    const double kp = k_ * phi;
    switch (derivative) {
      case 0: return c0_ + c1_ * std::cos(kp);
      case 1: return -c1_ * k_ * std::sin(kp);
      default: return -c1_ * k_ * k_ * std::cos(kp);
    }
  }
  return spline_->eval(phi, derivative);
}

double AngularProfile::value(const Vector& x) const {
  switch (family_) {
    case Family::Isotropic: return c0_;
    case Family::TwoSided: return x[0] >= 0.0 ? c0_ : c1_;
    case Family::Cosine:
    case Family::Tabulated: return polar(std::atan2(x[1], x[0]), 0);
    case Family::Custom: return custom_value_(x);
  }
  return 0.0;
}

Vector AngularProfile::gradient(const Vector& x) const {
  switch (family_) {
    case Family::Isotropic:
    case Family::TwoSided: return Vector::Zero(dim_);
    case Family::Cosine:
    case Family::Tabulated: {
      const double r2 = x.squaredNorm();
      const double fp = polar(std::atan2(x[1], x[0]), 1);
      Vector g(2);
      g << -x[1] / r2 * fp, x[0] / r2 * fp;
      return g;
    }
    case Family::Custom: return custom_grad_(x);
  }
  return Vector::Zero(dim_);
}

Matrix AngularProfile::hessian(const Vector& x) const {
  switch (family_) {
    case Family::Isotropic:
    case Family::TwoSided: return Matrix::Zero(dim_, dim_);
    case Family::Cosine:
    case Family::Tabulated: {
      const double r2 = x.squaredNorm();
      const double phi = std::atan2(x[1], x[0]);
      const double fp = polar(phi, 1), fpp = polar(phi, 2);
      Vector dphi(2);
      dphi << -x[1] / r2, x[0] / r2;
      Matrix d2phi(2, 2);
      const double r4 = r2 * r2;
      d2phi << 2.0 * x[0] * x[1] / r4, (x[1] * x[1] - x[0] * x[0]) / r4,
          (x[1] * x[1] - x[0] * x[0]) / r4, -2.0 * x[0] * x[1] / r4;
      return fpp * dphi * dphi.transpose() + fp * d2phi;
    }
    case Family::Custom:
      if (custom_hess_) return (*custom_hess_)(x);
      break;
  }
  const double h = 1e-5 * std::max(x.norm(), 1.0);
  Matrix H(dim_, dim_);
  for (int j = 0; j < dim_; ++j) {
    Vector xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    H.col(j) = (gradient(xp) - gradient(xm)) / (2.0 * h);
  }
  return 0.5 * (H + H.transpose());
}

HomogeneousPotential::HomogeneousPotential(AngularProfile profile, double gamma)
    : profile_(std::move(profile)), gamma_(gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw Error(ErrorKind::InvalidArgument, "gamma must lie in (0, 1)");
  if (profile_.dimension() <= 3) {
    for (const Vector& y : sphere_mesh(profile_.dimension(), profile_.dimension() == 1 ? 0 : 1024))
      if (!(profile_.value(y) > 0.0))
        throw Error(ErrorKind::ProfileInvalid, "profile must be positive on the unit sphere");
  }
}

std::vector<Vector> sphere_mesh(int dim, int count) {
  std::vector<Vector> mesh;
  if (dim == 1) {
    mesh.push_back(Vector::Constant(1, 1.0));
    mesh.push_back(Vector::Constant(1, -1.0));
    return mesh;
  }
  if (dim == 2) {
    const int n = count > 0 ? count : 4096;
    mesh.reserve(n);
    for (int i = 0; i < n; ++i) {
      const double phi = kTwoPi * i / n;
      Vector y(2);
      y << std::cos(phi), std::sin(phi);
      mesh.push_back(y);
    }
    return mesh;
  }
  if (dim == 3) {
    const int n = count > 0 ? count : 8192;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    mesh.reserve(n);
    for (int i = 0; i < n; ++i) {
      const double z = 1.0 - 2.0 * (i + 0.5) / n;
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * i;
      Vector y(3);
      y << rho * std::cos(phi), rho * std::sin(phi), z;
      mesh.push_back(y);
    }
    return mesh;
  }
  throw Error(ErrorKind::InvalidArgument, "sphere meshes are only defined for d <= 3");
}

double eval_U(const HomogeneousPotential& pot, const Vector& x) {
  const double r = x.norm();
  if (r == 0.0) return 0.0;
  return pot.profile().value(x / r) * std::pow(r, 1.0 + pot.gamma());
}

namespace {

Vector theta1_unchecked(const HomogeneousPotential& pot, const Vector& y) {
  const double g = pot.gamma();
  const Vector grad = pot.profile().gradient(y);
  return grad + ((1.0 + g) * pot.profile().value(y) - grad.dot(y)) * y;
}

}  // namespace

Vector eval_drift(const HomogeneousPotential& pot, const Vector& x) {
  const double r = x.norm();
  if (r == 0.0) return Vector::Zero(x.size());
  return std::pow(r, pot.gamma()) * theta1_unchecked(pot, x / r);
}

Vector theta1(const HomogeneousPotential& pot, const Vector& y) {
  if (std::abs(y.norm() - 1.0) > 1e-12) throw Error(ErrorKind::InvalidArgument, "theta1 expects a unit vector");
  return theta1_unchecked(pot, y);
}

double theta2(const HomogeneousPotential& pot, const Vector& y) {
  const double g = pot.gamma();
  const int d = pot.dimension();
  if (pot.profile().has_analytic_hessian()) {
    const double lap = pot.profile().hessian(y).trace();
    return lap + (1.0 + g) * (g + d - 1.0) * pot.profile().value(y);
  }
  return eval_divergence(pot, y / y.norm());
}

double eval_divergence(const HomogeneousPotential& pot, const Vector& x) {
  const double r = x.norm();
  if (r < 1e-8) throw Error(ErrorKind::SingularPoint, "div b is singular at the origin");
  if (pot.profile().has_analytic_hessian()) return theta2(pot, x / r) * std::pow(r, pot.gamma() - 1.0);
  const double h = 1e-5 * std::max(r, 1.0);
  double div = 0.0;
  for (int j = 0; j < x.size(); ++j) {
    Vector xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    div += (eval_drift(pot, xp)[j] - eval_drift(pot, xm)[j]) / (2.0 * h);
  }
  return div;
}

double eval_V(const HomogeneousPotential& pot, const Vector& x) {
  if (x.norm() < 1e-8) throw Error(ErrorKind::SingularPoint, "V is singular at the origin");
  return 0.5 * (eval_drift(pot, x).squaredNorm() + eval_divergence(pot, x));
}

double drift_bound(const HomogeneousPotential& pot, int mesh_count) {
  double a = 0.0;
  for (const Vector& y : sphere_mesh(pot.dimension(), mesh_count)) a = std::max(a, theta1_unchecked(pot, y).norm());
  return a;
}

double max_profile_hessian(const HomogeneousPotential& pot, int mesh_count) {
  double m = 0.0;
  for (const Vector& y : sphere_mesh(pot.dimension(), mesh_count)) {
    const double n = pot.profile().hessian(y).norm();
    if (!std::isfinite(n)) return std::numeric_limits<double>::infinity();
    m = std::max(m, n);
  }
  return m;
}

PotentialDecomposition decompose(const HomogeneousPotential& pot, int mesh_count) {
  const double g = pot.gamma();
  const int d = pot.dimension();
  if (!std::isfinite(max_profile_hessian(pot, mesh_count)))
    throw Error(ErrorKind::ProfileInvalid, "profile Hessian is unbounded on the sphere mesh");

  double sup_neg = 0.0;
  double inf_t1 = std::numeric_limits<double>::infinity();
  for (const Vector& y : sphere_mesh(d, mesh_count)) {
    sup_neg = std::max(sup_neg, std::max(0.0, -theta2(pot, y)));
    inf_t1 = std::min(inf_t1, theta1_unchecked(pot, y).squaredNorm());
  }
  if (!(inf_t1 > 0.0)) throw Error(ErrorKind::ProfileInvalid, "inf |theta1|^2 vanishes on the sphere mesh");

  PotentialDecomposition dec;
  dec.sup_theta2_negative = sup_neg;
  dec.inf_theta1_squared = inf_t1;
  dec.z = std::pow(sup_neg / inf_t1, 1.0 / (1.0 + g));
  dec.p = 0.5 * (0.5 * d + d / (1.0 - g));
  const double z = dec.z;
  dec.V2 = [pot, z](const Vector& x) {
    const double r = x.norm();
    if (z == 0.0 || r > z) return 0.0;
    if (r < 1e-8) throw Error(ErrorKind::SingularPoint, "V2 is singular at the origin");
    const double neg = std::max(0.0, -theta2(pot, x / r));
    return 0.5 * neg * std::pow(r, pot.gamma() - 1.0);
  };
  dec.V1 = [pot, V2 = dec.V2](const Vector& x) { return eval_V(pot, x) + V2(x); };
  return dec;
}

}  // namespace peano
