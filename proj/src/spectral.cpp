#include "peano/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "peano/error.hpp"
#include "peano/ode.hpp"

namespace peano {

std::size_t GridSpec::size() const {
  std::size_t s = 1;
  for (int a = 0; a < d; ++a) s *= static_cast<std::size_t>(n);
  return s;
}

Vector GridSpec::node(std::size_t flat) const {
  Vector x(d);
  for (int a = 0; a < d; ++a) {
    x[a] = coord(static_cast<int>(flat % n));
    flat /= n;
  }
  return x;
}

void GridSpec::validate() const {
  if (d < 1 || d > 3) throw Error(ErrorKind::InvalidArgument, "grid dimension must be 1, 2 or 3");
  if (n < 16) throw Error(ErrorKind::InvalidArgument, "grid needs n >= 16 points per axis");
  if (!(L > 0.0)) throw Error(ErrorKind::InvalidArgument, "grid half-width must be positive");
  if (cell_centered && n % 2 != 0)
    throw Error(ErrorKind::InvalidArgument, "a cell-centered grid needs even n to keep the origin off the nodes");
}

double box_half_width(const HomogeneousPotential& pot, double tail) {
  const double level = -std::log(tail);
  double L = 0.0;
  for (const Vector& e : sphere_mesh(pot.dimension()))
    L = std::max(L, std::pow(level / pot.profile().value(e), 1.0 / (1.0 + pot.gamma())));
  return L;
}

GridSpec make_grid(const HomogeneousPotential& pot, int n, double tail) {
  GridSpec g;
  g.d = pot.dimension();
  g.n = n;
  g.L = box_half_width(pot, tail);
  g.validate();
  return g;
}

namespace {

void check_memory(const GridSpec& grid, std::size_t cap) {
  const double N = static_cast<double>(grid.size());
  // matrix + Krylov basis + a rough sparse-factor fill estimate
  const double fill = grid.d == 1 ? 3.0 * N : grid.d == 2 ? N * std::log2(N) * 4.0 : std::pow(N, 4.0 / 3.0) * 2.0;
  const double bytes = N * (2 * grid.d + 1) * 12.0 + N * 8.0 * 140.0 + fill * 12.0;
  if (bytes > static_cast<double>(cap))
    throw Error(ErrorKind::GridTooLarge, "estimated " + std::to_string(static_cast<long long>(bytes / (1 << 20))) +
                                             " MiB exceeds the memory cap");
}

SparseMatrix laplacian_part(const GridSpec& grid, const Vector& diag_potential) {
  const std::size_t N = grid.size();
  const double h = grid.h();
  const double off = -0.5 / (h * h);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(N * (2 * grid.d + 1));
  std::size_t stride = 1;
  std::vector<std::size_t> strides(grid.d);
  for (int a = 0; a < grid.d; ++a) {
    strides[a] = stride;
    stride *= grid.n;
  }
  for (std::size_t i = 0; i < N; ++i) {
    trip.emplace_back(i, i, grid.d / (h * h) + diag_potential[i]);
    for (int a = 0; a < grid.d; ++a) {
      const std::size_t ia = (i / strides[a]) % grid.n;
      if (ia > 0) trip.emplace_back(i, i - strides[a], off);
      if (ia + 1 < static_cast<std::size_t>(grid.n)) trip.emplace_back(i, i + strides[a], off);
    }
  }
  SparseMatrix A(N, N);
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

// Mean of |x|^p over [a, b] with a, b of the same sign.
double power_mean(double a, double b, double p) {
  auto F = [p](double x) { return std::copysign(std::pow(std::abs(x), p + 1.0) / (p + 1.0), x); };
  return (F(b) - F(a)) / (b - a);
}

std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int q) {
  Matrix J = Matrix::Zero(q, q);
  for (int i = 1; i < q; ++i) J(i, i - 1) = J(i - 1, i) = i / std::sqrt(4.0 * i * i - 1.0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(J);
  std::vector<double> x(q), w(q);
  for (int i = 0; i < q; ++i) {
    x[i] = es.eigenvalues()[i];
    w[i] = 2.0 * es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
  }
  return {x, w};
}

Vector cell_averaged_V(const HomogeneousPotential& pot, const GridSpec& grid) {
  const std::size_t N = grid.size();
  const double h = grid.h();
  const double g = pot.gamma();
  Vector diag(N);
  if (grid.d == 1) {
    for (int side = 0; side < 2; ++side) {
      const Vector e = Vector::Constant(1, side == 0 ? 1.0 : -1.0);
      const double t1sq = theta1(pot, e).squaredNorm();
      const double t2 = theta2(pot, e);
      for (std::size_t i = 0; i < N; ++i) {
        const double c = grid.coord(static_cast<int>(i));
        if ((c > 0) != (side == 0)) continue;
        const double a = c - 0.5 * h, b = c + 0.5 * h;
        diag[i] = 0.5 * (t1sq * power_mean(a, b, 2.0 * g) + t2 * power_mean(a, b, g - 1.0));
      }
    }
    return diag;
  }
  const auto [x3, w3] = gauss_legendre(3);
  const auto [x8, w8] = gauss_legendre(8);
  const double near = 2.0 * h * std::sqrt(static_cast<double>(grid.d));
  for (std::size_t i = 0; i < N; ++i) {
    const Vector c = grid.node(i);
    const bool fine = c.norm() < near;
    const auto& xs = fine ? x8 : x3;
    const auto& ws = fine ? w8 : w3;
    const int q = static_cast<int>(xs.size());
    int total = 1;
    for (int a = 0; a < grid.d; ++a) total *= q;
    double acc = 0.0;
    Vector p(grid.d);
    for (int m = 0; m < total; ++m) {
      double w = 1.0;
      int idx = m;
      for (int a = 0; a < grid.d; ++a) {
        const int k = idx % q;
        idx /= q;
        p[a] = c[a] + 0.5 * h * xs[k];
        w *= 0.5 * ws[k];
      }
      acc += w * eval_V(pot, p);
    }
    diag[i] = acc;
  }
  return diag;
}

}  // namespace

SchrodingerOperator assemble(const HomogeneousPotential& pot, const GridSpec& grid, std::size_t memory_cap) {
  grid.validate();
  if (!grid.cell_centered) throw Error(ErrorKind::InvalidArgument, "homogeneous potentials need a cell-centered grid");
  if (grid.d != pot.dimension()) throw Error(ErrorKind::InvalidArgument, "grid and potential dimensions differ");
  check_memory(grid, memory_cap);
  SchrodingerOperator op;
  op.grid = grid;
  op.diagonal_potential = cell_averaged_V(pot, grid);
  op.matrix = laplacian_part(grid, op.diagonal_potential);
  return op;
}

SchrodingerOperator assemble(const PointFunction& V, const GridSpec& grid, std::size_t memory_cap) {
  grid.validate();
  check_memory(grid, memory_cap);
  SchrodingerOperator op;
  op.grid = grid;
  op.diagonal_potential.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) op.diagonal_potential[i] = V(grid.node(i));
  op.matrix = laplacian_part(grid, op.diagonal_potential);
  return op;
}

double SpectralResult::interpolate(int j, const Vector& x) const {
  if (j < 0 || j >= static_cast<int>(eigenfunctions.size()))
    throw Error(ErrorKind::InvalidArgument, "eigenfunction index out of range");
  if (x.size() != grid.d) throw Error(ErrorKind::InvalidArgument, "point dimension differs from the grid");
  const double h = grid.h();
  // Dirichlet ghosts at ±L hold 0, so the interpolant covers the whole box.
  std::vector<int> lo(grid.d);
  std::vector<double> frac(grid.d);
  for (int a = 0; a < grid.d; ++a) {
    if (x[a] < -grid.L || x[a] > grid.L)
      throw Error(ErrorKind::OutOfGrid, "point lies outside the spectral box [-L, L]^d with L = " + std::to_string(grid.L));
    const double s = (x[a] - grid.coord(0)) / h;  // node-index coordinate, ghosts at −½ and n−½
    int i = static_cast<int>(std::floor(s));
    i = std::clamp(i, -1, grid.n - 1);
    lo[a] = i;
    const double left = (i < 0) ? -grid.L : grid.coord(i);
    const double right = (i + 1 >= grid.n) ? grid.L : grid.coord(i + 1);
    frac[a] = (x[a] - left) / (right - left);
  }
  const Vector& psi = eigenfunctions[j];
  double acc = 0.0;
  for (int corner = 0; corner < (1 << grid.d); ++corner) {
    double w = 1.0;
    std::size_t flat = 0, stride = 1;
    bool ghost = false;
    for (int a = 0; a < grid.d; ++a) {
      const int bit = (corner >> a) & 1;
      const int idx = lo[a] + bit;
      w *= bit ? frac[a] : 1.0 - frac[a];
      if (idx < 0 || idx >= grid.n) ghost = true;
      flat += static_cast<std::size_t>(std::max(idx, 0)) * stride;
      stride *= grid.n;
    }
    if (!ghost && w != 0.0) acc += w * psi[flat];
  }
  return acc;
}

SpectralResult bottom_spectrum(const SchrodingerOperator& op, int k, const EigenOptions& opt) {
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "need k >= 1 eigenpairs");
  const double shift = op.diagonal_potential.minCoeff() - 1.0;
  EigenPairs pairs = shift_invert_lanczos(op.matrix, k, shift, opt);

  SpectralResult res;
  res.grid = op.grid;
  res.applications = pairs.applications;
  const double scale = std::pow(op.grid.h(), -0.5 * op.grid.d);
  // node nearest the origin, for the ground-state sign convention
  std::size_t center = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < op.grid.size(); ++i) {
    const double r = op.grid.node(i).norm();
    if (r < best) {
      best = r;
      center = i;
    }
  }
  for (int j = 0; j < k; ++j) {
    Vector psi = pairs.vectors[j] * scale;
    Eigen::Index arg = 0;
    psi.cwiseAbs().maxCoeff(&arg);
    const double ref = (j == 0) ? psi[center] : psi[arg];
    if (ref < 0) psi = -psi;
    res.eigenvalues.push_back(pairs.values[j]);
    res.residuals.push_back(pairs.residuals[j] * scale);
    res.eigenfunctions.push_back(std::move(psi));
  }
  return res;
}

namespace {

struct SideResult {
  double log_derivative;  // dψ/dξ / ψ at ξ = 0, ξ = |x|
  int nodes;
  double psi0;
};

// Integrates ψ'' = 2(V(ξ) − λ)ψ from ξ = L down to ξ = δ, then carries the
// log-derivative to ξ = 0 using ∫₀^δ V (the integrable singularity).
SideResult shoot_side(const std::function<double(double)>& V, double L, double delta,
                      const std::function<double(double)>& integral_V, double lambda) {
  const double kappa = std::sqrt(std::max(2.0 * (V(L) - lambda), 0.0));
  Vector y(2);
  y << 1.0, -kappa;
  auto rhs = [&](double xi, const Vector& s) {
    Vector f(2);
    f << s[1], 2.0 * (V(xi) - lambda) * s[0];
    return f;
  };
  OdeOptions opt;
  opt.abs_tol = 1e-14;
  opt.rel_tol = 1e-12;
  opt.max_step = L / 64.0;
  int nodes = 0;
  auto obs = [&](const OdeStep& st, Vector& s, Vector& f) {
    if ((st.y0[0] > 0) != (s[0] > 0) && s[0] != 0.0) ++nodes;
    const double mag = std::max(std::abs(s[0]), std::abs(s[1]));
    if (mag > 1e100) {
      s /= 1e100;
      f /= 1e100;
    }
    return true;
  };
  y = dopri5(rhs, L, y, delta, opt, obs);
  const double psi_d = y[0], dpsi_d = y[1];
  const double psi0 = psi_d - delta * dpsi_d;
  const double dpsi0 = dpsi_d - 2.0 * psi_d * (integral_V(delta) - lambda * delta);
  if ((psi0 > 0) != (psi_d > 0)) ++nodes;
  return {dpsi0 / psi0, nodes, psi0};
}

double bisect_shooting(const std::function<SideResult(int, double)>& side, double lo, double hi, double tol) {
  auto above = [&](double lambda) {
    const SideResult r = side(+1, lambda), l = side(-1, lambda);
    const double mismatch = -l.log_derivative - r.log_derivative;  // ψ'(0⁻)/ψ − ψ'(0⁺)/ψ
    return (r.nodes + l.nodes) >= 1 || mismatch < 0.0;
  };
  if (!(lo < hi)) throw Error(ErrorKind::Bracket, "bracket must satisfy lo < hi");
  if (above(lo) || !above(hi))
    throw Error(ErrorKind::Bracket, "bracket [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                        "] does not contain the ground energy");
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (above(mid) ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double shoot_1d(const HomogeneousPotential& pot, double lambda_lo, double lambda_hi, double tol) {
  if (pot.dimension() != 1) throw Error(ErrorKind::InvalidArgument, "shooting needs d = 1");
  const double L = box_half_width(pot);
  const double g = pot.gamma();
  const double delta = 1e-9;
  double t1sq[2], t2[2];
  for (int s = 0; s < 2; ++s) {
    const Vector e = Vector::Constant(1, s == 0 ? 1.0 : -1.0);
    t1sq[s] = theta1(pot, e).squaredNorm();
    t2[s] = theta2(pot, e);
  }
  auto side = [&](int sign, double lambda) {
    const int s = sign > 0 ? 0 : 1;
    auto V = [&](double xi) { return 0.5 * (t1sq[s] * std::pow(xi, 2 * g) + t2[s] * std::pow(xi, g - 1)); };
    auto IV = [&](double xi) {
      return 0.5 * (t1sq[s] * std::pow(xi, 2 * g + 1) / (2 * g + 1) + t2[s] * std::pow(xi, g) / g);
    };
    return shoot_side(V, L, delta, IV, lambda);
  };
  return bisect_shooting(side, lambda_lo, lambda_hi, tol);
}

double shoot_1d(const PointFunction& V, double L, double lambda_lo, double lambda_hi, double tol) {
  auto side = [&](int sign, double lambda) {
    auto Vs = [&](double xi) { return V(Vector::Constant(1, sign * xi)); };
    return shoot_side(Vs, L, 0.0, [](double) { return 0.0; }, lambda);
  };
  return bisect_shooting(side, lambda_lo, lambda_hi, tol);
}

BoundReport bound_check(const SpectralResult& res, const HomogeneousPotential& pot, const PointFunction& g, double C,
                        double decay_tol) {
  if (res.eigenfunctions.size() < 2) throw Error(ErrorKind::InvalidArgument, "bound_check needs >= 2 eigenpairs");
  const GridSpec& grid = res.grid;
  const std::size_t N = grid.size();
  std::vector<double> radius(N), U(N);
  for (std::size_t i = 0; i < N; ++i) {
    const Vector x = grid.node(i);
    radius[i] = x.norm();
    U[i] = eval_U(pot, x);
  }
  auto sup_weighted = [&](std::size_t j, double r) {
    double m = 0.0;
    for (std::size_t i = 0; i < N; ++i)
      if (radius[i] >= r) m = std::max(m, std::exp(U[i]) * std::abs(res.eigenfunctions[j][i]));
    return m;
  };

  BoundReport rep;
  rep.radius = 0.5 * grid.L;
  for (std::size_t j = 0; j < res.eigenfunctions.size(); ++j) rep.M.push_back(sup_weighted(j, rep.radius));
  rep.max_M = *std::max_element(rep.M.begin(), rep.M.end());
  std::vector<double> sorted = rep.M;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  const double median = (m % 2) ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  rep.bound = C > 0.0 ? C : 10.0 * median;
  rep.bounded = std::isfinite(rep.max_M) && rep.max_M <= rep.bound;
  for (double f : {0.25, 0.5, 0.625, 0.75}) {
    double mx = 0.0;
    for (std::size_t j = 0; j < res.eigenfunctions.size(); ++j) mx = std::max(mx, sup_weighted(j, f * grid.L));
    rep.profile_radii.push_back(f * grid.L);
    rep.profile_max.push_back(mx);
  }

  if (g) {
    rep.decay_checked = true;
    std::vector<double> D, G, logr;
    for (std::size_t i = 0; i < N; ++i) {
      if (radius[i] < 0.5 * grid.L || radius[i] > 0.75 * grid.L) continue;
      const double psi = res.eigenfunctions[0][i];
      if (!(psi > 0.0)) continue;
      const double gi = g(grid.node(i));
      const double di = -std::log(psi) - U[i];
      rep.decay_max_rel_error = std::max(rep.decay_max_rel_error, std::abs(di - gi) / std::abs(gi));
      D.push_back(di);
      G.push_back(gi);
      logr.push_back(std::log(radius[i]));
    }
    rep.decay_nodes = static_cast<int>(D.size());
    rep.decay_ok = rep.decay_nodes > 0 && rep.decay_max_rel_error <= decay_tol;
    if (D.size() >= 3) {
      Matrix A(D.size(), 3);
      Vector b(D.size());
      for (std::size_t i = 0; i < D.size(); ++i) {
        A(i, 0) = 1.0;
        A(i, 1) = logr[i];
        A(i, 2) = G[i];
        b[i] = D[i];
      }
      const Vector c = A.colPivHouseholderQr().solve(b);
      rep.decay_fit_coefficient = c[2];
    }
  }
  return rep;
}

GridConvergence grid_convergence(const HomogeneousPotential& pot, const GridSpec& grid, const EigenOptions& opt) {
  GridSpec fine = grid;
  fine.n = 2 * grid.n;
  GridConvergence gc;
  gc.coarse = bottom_spectrum(assemble(pot, grid), 1, opt).eigenvalues[0];
  gc.fine = bottom_spectrum(assemble(pot, fine), 1, opt).eigenvalues[0];
  gc.richardson = (4.0 * gc.fine - gc.coarse) / 3.0;
  gc.relative_change = std::abs(gc.coarse - gc.fine) / std::abs(gc.fine);
  return gc;
}

void write_spectrum_csv(const SpectralResult& res, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out << std::setprecision(17);
  for (int a = 0; a < res.grid.d; ++a) out << (a ? "," : "") << "x" << a;
  for (std::size_t j = 0; j < res.eigenfunctions.size(); ++j) out << ",psi" << (j + 1);
  out << "\n";
  for (std::size_t i = 0; i < res.grid.size(); ++i) {
    const Vector x = res.grid.node(i);
    for (int a = 0; a < res.grid.d; ++a) out << (a ? "," : "") << x[a];
    for (const Vector& psi : res.eigenfunctions) out << "," << psi[i];
    out << "\n";
  }
}

std::string spectrum_summary_json(const SpectralResult& res) {
  nlohmann::ordered_json j;
  j["eigenvalues"] = res.eigenvalues;
  j["residuals"] = res.residuals;
  j["applications"] = res.applications;
  j["grid"] = {{"d", res.grid.d}, {"L", res.grid.L}, {"n", res.grid.n}, {"h", res.grid.h()},
               {"cell_centered", res.grid.cell_centered}};
  return j.dump(2);
}

}  // namespace peano
