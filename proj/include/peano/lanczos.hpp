#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Sparse>

#include "peano/types.hpp"

namespace peano {

using SparseMatrix = Eigen::SparseMatrix<double>;

struct EigenOptions {
  double tol = 1e-10;               // on ‖Ax − λx‖ for unit x
  int max_applications = 10000;     // shift-invert solves, summed over all restarts
  int basis_size = 60;              // Krylov basis before a thick restart
  std::uint64_t seed = 0x5eed5eedULL;
};

struct EigenPairs {
  std::vector<double> values;     // ascending
  std::vector<Vector> vectors;    // unit Euclidean norm
  std::vector<double> residuals;  // ‖Ax − λx‖ per pair
  int applications = 0;
};

/// k smallest eigenpairs of a symmetric sparse matrix by shift-invert Lanczos
/// with full reorthogonalization and thick restarts. Pairs are locked one at a
/// time and every fresh run starts from a random vector orthogonal to the locked
/// set, so exactly degenerate eigenvalues are recovered with their multiplicity.
/// `shift` must lie strictly below the spectrum.
EigenPairs shift_invert_lanczos(const SparseMatrix& A, int k, double shift, const EigenOptions& opt = {});

}  // namespace peano
