#pragma once

#include "simplicits/common.hpp"

#include <optional>

// Dense symmetric kernels for the reduced Newton solve. Dimensions are 12n
// (a few hundred at most), so everything is dense and O(d^3).
namespace simplicits::linalg {

class NotPositiveDefinite : public NumericalError {
public:
  NotPositiveDefinite() : NumericalError("not positive definite") {}
};

/// max |A - A^T| relative to max |A| (absolute when A is tiny).
double asymmetry(const MatrixX& A);

/// Lower Cholesky factor, or nullopt on a non-positive or non-finite pivot.
std::optional<MatrixX> try_cholesky(const MatrixX& A);

/// Solves L L^T x = b for a factor produced by try_cholesky.
VectorX cholesky_substitute(const MatrixX& L, const VectorX& b);

/// Solves A x = b for symmetric positive definite A.
/// Throws NotPositiveDefinite, or InputError when A is not symmetric.
VectorX cholesky_solve(const MatrixX& A, const VectorX& b);

struct SymEig {
  VectorX values;  // ascending
  MatrixX vectors; // column k pairs with values(k)
};

/// Cyclic Jacobi eigensolver. Throws InputError on non-symmetric input.
SymEig sym_eig(const MatrixX& A);

/// Clamps the spectrum of A from below at `floor`. Returns A itself when its
/// smallest eigenvalue is already >= floor.
MatrixX spd_project(const MatrixX& A, double floor);

} // namespace simplicits::linalg
