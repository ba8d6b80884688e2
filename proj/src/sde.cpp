#include "peano/sde.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>

#include <json.hpp>

namespace peano {

void SDEConfig::validate() const {
  if (!(epsilon >= 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be >= 0");
  if (!(T > 0.0)) throw Error(ErrorKind::InvalidArgument, "horizon T must be positive");
  if (!(dt > 0.0) || dt > T) throw Error(ErrorKind::InvalidArgument, "need 0 < dt <= T");
  if (n_paths < 1) throw Error(ErrorKind::InvalidArgument, "need at least one path");
  if (record_stride < 1) throw Error(ErrorKind::InvalidArgument, "record stride must be >= 1");
}

double epsilon_gamma(double epsilon, double gamma) { return std::pow(epsilon, 2.0 * (1.0 - gamma) / (1.0 + gamma)); }

double default_dt(double epsilon, double gamma) { return std::min(1e-4, epsilon_gamma(epsilon, gamma) / 50.0); }

SteppingPlan make_plan(const SDEConfig& cfg) {
  SteppingPlan plan;
  plan.n_steps = std::max(1L, std::lround(cfg.T / cfg.dt));
  plan.dt = cfg.T / static_cast<double>(plan.n_steps);
  for (long k = 0; k <= plan.n_steps; k += cfg.record_stride) plan.recorded.push_back(k);
  if (plan.recorded.back() != plan.n_steps) plan.recorded.push_back(plan.n_steps);
  return plan;
}

PathEnsemble simulate(const HomogeneousPotential& pot, const SDEConfig& cfg, int workers) {
  const int d = pot.dimension();
  if (d == 1) {
    const double cp = theta1(pot, Vector::Constant(1, 1.0))[0];
    const double cm = theta1(pot, Vector::Constant(1, -1.0))[0];
    const double g = pot.gamma();
    if (g == 0.5)
      return simulate_scalar([cp, cm](double x) { return x >= 0.0 ? cp * std::sqrt(x) : cm * std::sqrt(-x); }, cfg,
                             workers);
    return simulate_scalar([cp, cm, g](double x) { return x >= 0.0 ? cp * std::pow(x, g) : cm * std::pow(-x, g); },
                           cfg, workers);
  }
  return simulate_with(
      [&pot, d](const double* x, double* b) {
        const Vector v = Eigen::Map<const Vector>(x, d);
        Eigen::Map<Vector>(b, d) = eval_drift(pot, v);
      },
      d, cfg, workers);
}

PathEnsemble simulate_zero_drift(int d, const SDEConfig& cfg, int workers) {
  return simulate_with(
      [d](const double*, double* b) {
        for (int a = 0; a < d; ++a) b[a] = 0.0;
      },
      d, cfg, workers);
}

std::vector<double> brownian_path(int d, const SDEConfig& cfg, std::size_t path) {
  const SteppingPlan plan = make_plan(cfg);
  PhiloxStream stream(path_key(cfg.master_seed), path);
  const double s = std::sqrt(plan.dt);
  std::vector<double> W((plan.n_steps + 1) * d, 0.0);
  for (long k = 1; k <= plan.n_steps; ++k)
    for (int a = 0; a < d; ++a) W[k * d + a] = W[(k - 1) * d + a] + s * normal(stream);
  return W;
}

Matrix endpoint_slice(const PathEnsemble& ens, double t) {
  const double T = ens.config.T;
  if (t < 0.0 || t > T * (1.0 + 1e-12)) throw Error(ErrorKind::OutOfRange, "slice time outside [0, T]");
  std::size_t best = 0;
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < ens.records(); ++r) {
    const double g = std::abs(ens.time(r) - t);
    if (g < gap) {
      gap = g;
      best = r;
    }
  }
  if (gap > 0.5 * ens.dt * (1.0 + 1e-9))
    throw Error(ErrorKind::OutOfRange, "no recorded step within dt/2 of t = " + std::to_string(t));
  const std::size_t n = ens.valid.size() - ens.excluded;
  Matrix out(n, ens.d);
  std::size_t row = 0;
  for (std::size_t p = 0; p < ens.valid.size(); ++p) {
    if (!ens.valid[p]) continue;
    const double* s = ens.state(p, best);
    for (int a = 0; a < ens.d; ++a) out(row, a) = s[a];
    ++row;
  }
  return out;
}

namespace {

constexpr char kMagic[8] = {'P', 'E', 'A', 'N', 'O', 'E', 'N', 'S'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
T byte_reverse(T v) {
  char* b = reinterpret_cast<char*>(&v);
  std::reverse(b, b + sizeof v);
  return v;
}

template <typename T>
void put_le(std::ostream& out, T v) {
  if constexpr (std::endian::native == std::endian::big) v = byte_reverse(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get_le(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if constexpr (std::endian::native == std::endian::big) v = byte_reverse(v);
  return v;
}

}  // namespace

void write_ensemble(const PathEnsemble& ens, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  nlohmann::ordered_json h;
  h["epsilon"] = ens.config.epsilon;
  h["T"] = ens.config.T;
  h["dt_requested"] = ens.config.dt;
  h["n_paths"] = ens.config.n_paths;
  h["master_seed"] = ens.config.master_seed;
  h["record_stride"] = ens.config.record_stride;
  h["d"] = ens.d;
  h["n_steps"] = ens.n_steps;
  h["dt"] = ens.dt;
  h["recorded_steps"] = ens.recorded_steps;
  std::vector<std::size_t> excluded;
  for (std::size_t p = 0; p < ens.valid.size(); ++p)
    if (!ens.valid[p]) excluded.push_back(p);
  h["excluded_paths"] = excluded;
  const std::string header = h.dump();
  out.write(kMagic, 8);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint64_t>(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (double v : ens.data) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw Error(ErrorKind::Io, "short write to '" + path + "'");
}

PathEnsemble read_ensemble(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw Error(ErrorKind::Io, "'" + path + "' is not an ensemble file");
  if (get_le<std::uint32_t>(in) != kVersion) throw Error(ErrorKind::Io, "unsupported ensemble file version");
  const auto len = get_le<std::uint64_t>(in);
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  const auto h = nlohmann::json::parse(header);
  PathEnsemble ens;
  ens.config.epsilon = h["epsilon"];
  ens.config.T = h["T"];
  ens.config.dt = h["dt_requested"];
  ens.config.n_paths = h["n_paths"];
  ens.config.master_seed = h["master_seed"];
  ens.config.record_stride = h["record_stride"];
  ens.d = h["d"];
  ens.n_steps = h["n_steps"];
  ens.dt = h["dt"];
  ens.recorded_steps = h["recorded_steps"].get<std::vector<long>>();
  ens.valid.assign(ens.config.n_paths, 1);
  for (std::size_t p : h["excluded_paths"].get<std::vector<std::size_t>>()) {
    ens.valid.at(p) = 0;
    ++ens.excluded;
  }
  ens.data.resize(ens.config.n_paths * ens.records() * ens.d);
  for (double& v : ens.data) v = std::bit_cast<double>(get_le<std::uint64_t>(in));
  if (!in) throw Error(ErrorKind::Io, "'" + path + "' is truncated");
  return ens;
}

void write_slice_csv(const Matrix& slice, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  out << std::setprecision(17);
  for (Eigen::Index a = 0; a < slice.cols(); ++a) out << (a ? "," : "") << "x" << a;
  out << "\n";
  for (Eigen::Index i = 0; i < slice.rows(); ++i) {
    for (Eigen::Index a = 0; a < slice.cols(); ++a) out << (a ? "," : "") << slice(i, a);
    out << "\n";
  }
}

}  // namespace peano
