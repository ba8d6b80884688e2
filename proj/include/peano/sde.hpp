#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "peano/error.hpp"
#include "peano/parallel.hpp"
#include "peano/potential.hpp"
#include "peano/rng.hpp"

namespace peano {

struct SDEConfig {
  double epsilon = 0.1;
  double T = 1.0;
  double dt = 1e-4;
  std::size_t n_paths = 1000;
  std::uint64_t master_seed = 1;
  int record_stride = 1;

  void validate() const;
};

/// ε_γ = ε^{2(1−γ)/(1+γ)}.
double epsilon_gamma(double epsilon, double gamma);
/// min(1e−4, ε_γ/50).
double default_dt(double epsilon, double gamma);

/// Euler–Maruyama paths from the origin, stored path-major as
/// data[(path·records + r)·d + a].
struct PathEnsemble {
  SDEConfig config;
  int d = 1;
  long n_steps = 0;
  double dt = 0.0;                  // T / n_steps, the step actually taken
  std::vector<long> recorded_steps;  // always includes 0 and n_steps
  std::vector<double> data;
  std::vector<unsigned char> valid;  // 0 when the path left the finite range
  std::size_t excluded = 0;

  std::size_t records() const { return recorded_steps.size(); }
  double time(std::size_t r) const { return static_cast<double>(recorded_steps[r]) * dt; }
  const double* state(std::size_t path, std::size_t r) const { return &data[(path * records() + r) * d]; }
};

/// Per-path Philox key derived from the master seed.
inline std::uint64_t path_key(std::uint64_t master_seed) { return splitmix64(master_seed ^ 0x7065616e6f2d7365ULL); }

struct SteppingPlan {
  long n_steps;
  double dt;
  std::vector<long> recorded;
};
SteppingPlan make_plan(const SDEConfig& cfg);

/// Generic driver: drift(x_in, b_out) writes b(x) for a d-vector in raw storage.
template <typename Drift>
PathEnsemble simulate_with(Drift drift, int d, const SDEConfig& cfg, int workers = 1) {
  cfg.validate();
  const SteppingPlan plan = make_plan(cfg);
  PathEnsemble ens;
  ens.config = cfg;
  ens.d = d;
  ens.n_steps = plan.n_steps;
  ens.dt = plan.dt;
  ens.recorded_steps = plan.recorded;
  const std::size_t R = plan.recorded.size();
  ens.data.assign(cfg.n_paths * R * d, 0.0);
  ens.valid.assign(cfg.n_paths, 1);
  const double h = plan.dt;
  const double noise = cfg.epsilon * std::sqrt(h);
  const std::uint64_t key = path_key(cfg.master_seed);

  parallel_for(cfg.n_paths, workers, [&](std::size_t begin, std::size_t end) {
    std::vector<double> x(d), b(d);
    for (std::size_t p = begin; p < end; ++p) {
      PhiloxStream stream(key, p);
      std::fill(x.begin(), x.end(), 0.0);
      double* out = &ens.data[p * R * d];
      std::size_t next = 1;
      for (long k = 1; k <= plan.n_steps; ++k) {
        drift(x.data(), b.data());
        for (int a = 0; a < d; ++a) x[a] += b[a] * h + noise * normal(stream);
        if (next < R && plan.recorded[next] == k) {
          bool finite = true;
          for (int a = 0; a < d; ++a) {
            out[next * d + a] = x[a];
            finite = finite && std::isfinite(x[a]);
          }
          if (!finite) {
            ens.valid[p] = 0;
            break;
          }
          ++next;
        }
      }
    }
  });
  for (unsigned char v : ens.valid) ens.excluded += (v == 0);
  return ens;
}

/// Scalar (d = 1) driver stepping a batch of paths in lockstep so the
/// latency of consecutive drift evaluations overlaps. Same numbers as simulate_with.
template <typename Drift1>
PathEnsemble simulate_scalar(Drift1 drift, const SDEConfig& cfg, int workers = 1) {
  cfg.validate();
  const SteppingPlan plan = make_plan(cfg);
  PathEnsemble ens;
  ens.config = cfg;
  ens.d = 1;
  ens.n_steps = plan.n_steps;
  ens.dt = plan.dt;
  ens.recorded_steps = plan.recorded;
  const std::size_t R = plan.recorded.size();
  ens.data.assign(cfg.n_paths * R, 0.0);
  ens.valid.assign(cfg.n_paths, 1);
  const double h = plan.dt;
  const double noise = cfg.epsilon * std::sqrt(h);
  const std::uint64_t key = path_key(cfg.master_seed);
  constexpr std::size_t B = 8;
  const std::size_t batches = (cfg.n_paths + B - 1) / B;

  parallel_for(batches, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t bi = begin; bi < end; ++bi) {
      const std::size_t p0 = bi * B;
      const std::size_t m = std::min(B, cfg.n_paths - p0);
      std::vector<PhiloxStream> streams;
      for (std::size_t j = 0; j < m; ++j) streams.emplace_back(key, p0 + j);
      double x[B] = {};
      std::size_t next = 1;
      for (long k = 1; k <= plan.n_steps; ++k) {
        for (std::size_t j = 0; j < m; ++j) x[j] += drift(x[j]) * h + noise * normal(streams[j]);
        if (next < R && plan.recorded[next] == k) {
          for (std::size_t j = 0; j < m; ++j) ens.data[(p0 + j) * R + next] = x[j];
          ++next;
        }
      }
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t r = 0; r < R; ++r)
          if (!std::isfinite(ens.data[(p0 + j) * R + r])) ens.valid[p0 + j] = 0;
    }
  });
  for (unsigned char v : ens.valid) ens.excluded += (v == 0);
  return ens;
}

PathEnsemble simulate(const HomogeneousPotential& pot, const SDEConfig& cfg, int workers = 1);

/// Pure Brownian motion scaled by ε (the b ≡ 0 hook).
PathEnsemble simulate_zero_drift(int d, const SDEConfig& cfg, int workers = 1);

/// The Brownian path W_{t_k} (k = 0..n_steps, flattened k·d + a) that drove
/// `path` in an ensemble simulated with `cfg`.
std::vector<double> brownian_path(int d, const SDEConfig& cfg, std::size_t path);

/// Valid-path states at recorded time t (|t − recorded| ≤ dt/2), rows = paths.
Matrix endpoint_slice(const PathEnsemble& ens, double t);

void write_ensemble(const PathEnsemble& ens, const std::string& path);
PathEnsemble read_ensemble(const std::string& path);
void write_slice_csv(const Matrix& slice, const std::string& path);

}  // namespace peano
