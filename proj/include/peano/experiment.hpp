#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "peano/config.hpp"
#include "peano/density.hpp"
#include "peano/potential.hpp"

namespace peano {

struct PotentialSection {
  std::string family = "isotropic";  // isotropic | two_sided | cosine | tabulated | harmonic
  int d = 1;
  double gamma = 0.5;
  double c = 1.0;                    // isotropic
  double c_plus = 1.0, c_minus = 1.0;  // two_sided
  double c0 = 1.0, c1 = 0.0;         // cosine
  int k = 1;
  std::string file;                  // tabulated, resolved against the config directory
};

struct GridSection {
  int n = 2048;
  double L = 0.0;  // 0 selects the tail rule
  int eigenpairs = 8;
};

struct FlowSection {
  double T = 1.0;
  int angles = 0;  // 0 selects the default mesh
  double r0 = 1e-6;
};

struct SdeSection {
  std::vector<double> ladder;
  double dt = 0.0;  // 0 selects min(1e−4, ε_γ/50) per rung
  std::size_t n_paths = 100000;
  std::uint64_t master_seed = 1;
};

struct RatesSection {
  double tol = 1e-3;
  double delta = 0.1;
  std::size_t n_paths = 64;  // paths evaluated with I1/I2
  int mesh = 1000;           // recorded steps per evaluated path
};

struct ExperimentConfig {
  std::string source;
  PotentialSection potential;
  GridSection grid;
  FlowSection flow;
  SdeSection sde;
  RatesSection rates;
  std::vector<RateTarget> targets;
  std::string output_dir = "out";

  /// Throws a config error naming the offending field.
  void validate() const;
  bool harmonic() const { return potential.family == "harmonic"; }
};

ExperimentConfig load_experiment(const ConfigDocument& doc);
ExperimentConfig load_experiment(const std::string& path);

/// Canonical JSON of the resolved config (what the manifest embeds and hashes).
std::string resolved_config_json(const ExperimentConfig& cfg);
HomogeneousPotential make_potential(const ExperimentConfig& cfg);

std::uint64_t fnv1a64(const std::string& bytes);
std::uint64_t file_fnv1a64(const std::string& path);

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"spectrum", "flow", "simulate", "density", "rate"};
  return names;
}

struct RunOptions {
  std::string out_dir;       // overrides the config when non-empty
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string last_stage = "rate";
};

/// Runs the stages up to `last_stage`, writing outputs and manifest.json into
/// the output directory. Returns 0 on success and 2 when a stage failed (the
/// failure is recorded in the manifest).
int run_pipeline(ExperimentConfig cfg, const RunOptions& opt, std::ostream& log);

/// Invariant suite; one PASS/FAIL line per check. Returns the number of failures.
int run_verify(std::ostream& log, int workers = 1);

}  // namespace peano
