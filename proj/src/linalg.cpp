#include "simplicits/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace simplicits::linalg {

namespace {

constexpr double kSymmetryTol = 1e-9;
constexpr int kMaxSweeps = 100;

void require_square(const MatrixX& A, const char* what) {
  if (A.rows() != A.cols()) {
    throw InputError(std::string(what) + ": matrix is not square");
  }
}

void require_symmetric(const MatrixX& A, const char* what) {
  require_square(A, what);
  if (asymmetry(A) > kSymmetryTol) {
    throw InputError(std::string(what) + ": matrix is not symmetric");
  }
}

} // namespace

double asymmetry(const MatrixX& A) {
  if (A.size() == 0) return 0.0;
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  return (A - A.transpose()).cwiseAbs().maxCoeff() / scale;
}

std::optional<MatrixX> try_cholesky(const MatrixX& A) {
  const Eigen::Index n = A.rows();
  MatrixX L = MatrixX::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double diag = A(j, j);
    for (Eigen::Index k = 0; k < j; ++k) diag -= L(j, k) * L(j, k);
    if (!(diag > 0.0) || !std::isfinite(diag)) return std::nullopt;
    const double ljj = std::sqrt(diag);
    L(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = A(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      L(i, j) = s / ljj;
    }
  }
  return L;
}

VectorX cholesky_substitute(const MatrixX& L, const VectorX& b) {
  const Eigen::Index n = L.rows();
  VectorX y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = b(i);
    for (Eigen::Index k = 0; k < i; ++k) s -= L(i, k) * y(k);
    y(i) = s / L(i, i);
  }
  VectorX x(n);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    double s = y(i);
    for (Eigen::Index k = i + 1; k < n; ++k) s -= L(k, i) * x(k);
    x(i) = s / L(i, i);
  }
  return x;
}

VectorX cholesky_solve(const MatrixX& A, const VectorX& b) {
  require_symmetric(A, "cholesky_solve");
  if (b.size() != A.rows()) throw InputError("cholesky_solve: size mismatch");
  auto L = try_cholesky(A);
  if (!L) throw NotPositiveDefinite();
  return cholesky_substitute(*L, b);
}

SymEig sym_eig(const MatrixX& input) {
  require_symmetric(input, "sym_eig");
  const Eigen::Index n = input.rows();
  MatrixX a = 0.5 * (input + input.transpose());
  MatrixX v = MatrixX::Identity(n, n);

  const double scale = a.norm();
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index q = 1; q < n; ++q)
      for (Eigen::Index p = 0; p < q; ++p) off += a(p, q) * a(p, q);
    if (std::sqrt(2.0 * off) <= 1e-15 * scale || off == 0.0) break;

    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        // A <- J^T A J with the (p, q) rotation; columns then rows.
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });
  SymEig out{VectorX(n), MatrixX(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[k], order[k]);
    out.vectors.col(k) = v.col(order[k]);
  }
  return out;
}

MatrixX spd_project(const MatrixX& A, double floor) {
  require_square(A, "spd_project");
  // Fast path: A - floor*I positive definite means every eigenvalue exceeds floor.
  MatrixX shifted = A;
  shifted.diagonal().array() -= floor;
  if (try_cholesky(0.5 * (shifted + shifted.transpose()))) return A;

  SymEig eig = sym_eig(A);
  VectorX clamped = eig.values.cwiseMax(floor);
  MatrixX out = eig.vectors * clamped.asDiagonal() * eig.vectors.transpose();
  return 0.5 * (out + out.transpose());
}

} // namespace simplicits::linalg
