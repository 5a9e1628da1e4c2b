#include "uapmimo/linalg.hpp"

#include <cmath>

#include "uapmimo/error.hpp"
#include "uapmimo/random.hpp"

namespace uapmimo {

PrincipalDirection first_principal_direction(const RowMatrix& x, int max_iters, double tol, std::uint64_t seed) {
  if (x.rows() < 1 || x.cols() < 1) throw DimensionMismatch("gradient matrix must be non-empty");
  if (!x.allFinite()) throw DataError("gradient matrix has non-finite entries");
  if (x.squaredNorm() == 0.0) throw ZeroMatrix("gradient matrix is zero");

  const Matrix gram = x.transpose() * x;
  Rng rng(seed);
  Vector v(x.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-1.0, 1.0);
  v.normalize();

  PrincipalDirection out;
  out.rayleigh_trace.push_back(v.dot(gram * v));
  for (int it = 1; it <= max_iters; ++it) {
    Vector next = gram * v;
    const double norm = next.norm();
    if (norm == 0.0) {
      // Start vector in the null space; restart from a fresh draw.
      for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-1.0, 1.0);
      v.normalize();
      continue;
    }
    next /= norm;
    if (next.dot(v) < 0) next = -next;
    const double change = (next - v).norm();
    v = std::move(next);
    out.iterations = it;
    out.rayleigh_trace.push_back(v.dot(gram * v));
    if (change < tol) {
      out.converged = true;
      break;
    }
  }
  out.direction = std::move(v);
  return out;
}

}  // namespace uapmimo
