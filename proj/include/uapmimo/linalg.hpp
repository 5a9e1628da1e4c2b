#ifndef UAPMIMO_LINALG_HPP
#define UAPMIMO_LINALG_HPP

#include <cstdint>
#include <vector>

#include "uapmimo/types.hpp"

namespace uapmimo {

struct PrincipalDirection {
  Vector direction;  // unit l2 norm, sign arbitrary
  bool converged = false;
  int iterations = 0;
  std::vector<double> rayleigh_trace;  // ||X v||^2 per iterate
};

/// Top right-singular vector of X (rows are samples, no centering) by power
/// iteration on X^T X from a seeded random start. Stops when successive
/// sign-aligned iterates differ by less than tol in l2.
///
/// Throws ZeroMatrix if X is all zeros.
PrincipalDirection first_principal_direction(const RowMatrix& x, int max_iters = 10000, double tol = 1e-10,
                                             std::uint64_t seed = 0);

}  // namespace uapmimo

#endif  // UAPMIMO_LINALG_HPP
