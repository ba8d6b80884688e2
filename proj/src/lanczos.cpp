#include "peano/lanczos.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "peano/error.hpp"

namespace peano {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Vector random_vector(Eigen::Index n, std::uint64_t& state) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53 - 0.5;
  return v;
}

// Two passes of classical Gram–Schmidt against the columns of Q (first `cols` only).
void orthogonalize(Vector& r, const Matrix& Q, Eigen::Index cols) {
  if (cols == 0) return;
  for (int pass = 0; pass < 2; ++pass) {
    const Vector c = Q.leftCols(cols).transpose() * r;
    r.noalias() -= Q.leftCols(cols) * c;
  }
}

}  // namespace

EigenPairs shift_invert_lanczos(const SparseMatrix& A, int k, double shift, const EigenOptions& opt) {
  const Eigen::Index n = A.rows();
  if (k < 1 || k >= n) throw Error(ErrorKind::InvalidArgument, "eigenpair count must satisfy 1 <= k < n");

  SparseMatrix shifted = A;
  for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) -= shift;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(shifted);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::NonConvergence, "factorization of A - shift*I failed");

  const Eigen::Index m_max = std::min<Eigen::Index>(n - k, std::max(opt.basis_size, 2 * k + 10));
  const Eigen::Index keep = std::max<Eigen::Index>(2, std::min<Eigen::Index>(m_max / 2, k + 8));
  std::uint64_t rng = opt.seed;

  Matrix X(n, k);  // locked eigenvectors
  EigenPairs out;
  double last_residual = std::numeric_limits<double>::infinity();

  Vector start = random_vector(n, rng);
  while (static_cast<int>(out.values.size()) < k) {
    const Eigen::Index locked = static_cast<Eigen::Index>(out.values.size());
    Matrix V(n, m_max), W(n, m_max);
    Eigen::Index j = 0;
    orthogonalize(start, X, locked);
    Vector v = start / start.norm();
    bool done = false;

    while (!done) {
      if (out.applications >= opt.max_applications) {
        std::ostringstream msg;
        msg << "shift-invert Lanczos stopped after " << out.applications << " solves with " << locked
            << " of " << k << " pairs converged; last residual " << last_residual;
        throw Error(ErrorKind::NonConvergence, msg.str());
      }
      V.col(j) = v;
      W.col(j) = ldlt.solve(v);
      ++out.applications;
      Vector r = W.col(j);
      orthogonalize(r, X, locked);
      orthogonalize(r, V, j + 1);
      ++j;

      const bool breakdown = r.norm() < 1e-12 * W.col(j - 1).norm();
      if (j % 5 == 0 || j == m_max || breakdown) {
        Matrix H = V.leftCols(j).transpose() * W.leftCols(j);
        H = 0.5 * (H + H.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Matrix> es(H);
        // largest Ritz values of the inverse are the smallest eigenvalues of A
        const Matrix Y = es.eigenvectors().rowwise().reverse();
        Vector x = V.leftCols(j) * Y.col(0);
        x /= x.norm();
        const Vector Ax = A * x;
        const double lambda = x.dot(Ax);
        last_residual = (Ax - lambda * x).norm();
        if (last_residual <= opt.tol) {
          X.col(locked) = x;
          out.values.push_back(lambda);
          out.vectors.push_back(x);
          out.residuals.push_back(last_residual);
          // warm start: remaining Ritz directions plus a fresh random component
          start = random_vector(n, rng);
          start /= start.norm();
          for (Eigen::Index c = 1; c < std::min<Eigen::Index>(j, 4); ++c) start += V.leftCols(j) * Y.col(c);
          done = true;
          continue;
        }
        if (j == m_max) {
          const Matrix Yk = Y.leftCols(keep);
          const Matrix Vk = V.leftCols(j) * Yk;
          const Matrix Wk = W.leftCols(j) * Yk;
          V.leftCols(keep) = Vk;
          W.leftCols(keep) = Wk;
          j = keep;
        }
      }
      if (breakdown) {
        r = random_vector(n, rng);
        orthogonalize(r, X, locked);
        orthogonalize(r, V, j);
      }
      v = r / r.norm();
    }
  }

  std::vector<int> order(k);
  for (int i = 0; i < k; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return out.values[a] < out.values[b]; });
  EigenPairs sorted;
  sorted.applications = out.applications;
  for (int i : order) {
    sorted.values.push_back(out.values[i]);
    sorted.vectors.push_back(out.vectors[i]);
    sorted.residuals.push_back(out.residuals[i]);
  }
  return sorted;
}

}  // namespace peano
