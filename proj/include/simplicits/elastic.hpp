#pragma once

#include "simplicits/common.hpp"
#include "simplicits/mlp.hpp"

#include <string>

namespace simplicits {

/// Reduced degrees of freedom: n affine handle matrices Z_j (3x4), flattened
/// handle-major and row-major inside each block: z[12 j + 4 r + k] = Z_j(r, k).
class HandleTransforms {
public:
  HandleTransforms() = default;
  explicit HandleTransforms(int n) : n_(n), z_(VectorX::Zero(12 * n)) {}
  HandleTransforms(int n, VectorX z);

  static constexpr Eigen::Index index(int handle, int row, int col) {
    return 12 * handle + 4 * row + col;
  }

  int n() const { return n_; }
  const VectorX& flat() const { return z_; }
  VectorX& flat() { return z_; }

  Mat34 handle(int j) const;
  void set_handle(int j, const Mat34& Z);

private:
  int n_ = 0;
  VectorX z_;
};

/// phi(X) = X + sum_j w_j Z_j [X; 1].
Vec3 deformation_map(const VectorX& w, const HandleTransforms& Z, const Vec3& X);

/// F = I + sum_j (w_j A_j + (Z_j [X; 1]) grad_w_j^T), A_j the linear block of Z_j.
/// grad_w is n x 3 with row j the spatial gradient of w_j at X.
Mat3 deformation_gradient_analytic(const VectorX& w, const MatrixX& grad_w,
                                   const HandleTransforms& Z, const Vec3& X);

/// Central differences of phi(., Z) with weights from the network:
/// column k = (phi(X + h e_k) - phi(X - h e_k)) / 2h.
Mat3 deformation_gradient_fd(const SkinningField& net, const HandleTransforms& Z, const Vec3& X,
                             double h);

/// Default spatial step: 1e-4 times the network's input length scale.
inline double default_fd_step(const SkinningField& net) { return 1e-4 * net.input_scale(); }

/// Central-difference spatial gradients of every weight, n x 3.
MatrixX weight_gradient_fd(const SkinningField& net, const Vec3& X, double h);

enum class EnergyKind { linear, neohookean, stable_neohookean };

std::string to_string(EnergyKind kind);
EnergyKind energy_kind_from_string(const std::string& name);

/// Green-strain (St. Venant-Kirchhoff style) energy, mu tr(E^T E) + lambda/2 tr(E)^2,
/// E = (F^T F - I) / 2.
double psi_linear(const Mat3& F, double lambda, double mu);
/// mu/2 (I1 - 3) + lambda/2 (J - 1)^2.
double psi_neohookean_paper(const Mat3& F, double lambda, double mu);
/// mu/2 (I_C - 3) - mu (J - 1) + lambda/2 (J - 1)^2. Finite for inverted F.
double psi_stable_neohookean(const Mat3& F, double lambda, double mu);
/// (1 - alpha) psi_linear + alpha psi_neohookean_paper.
double scheduled_energy(const Mat3& F, double lambda, double mu, double alpha);

double psi(EnergyKind kind, const Mat3& F, double lambda, double mu);
/// dPsi/dF as a 3x3 matrix.
Mat3 psi_gradient(EnergyKind kind, const Mat3& F, double lambda, double mu);
/// d2Psi/dF2 in column-major vec(F) ordering: index 3 c + r holds F(r, c).
Mat9 psi_hessian(EnergyKind kind, const Mat3& F, double lambda, double mu);

Mat3 scheduled_gradient(const Mat3& F, double lambda, double mu, double alpha);

inline Vec9 vec(const Mat3& F) { return Eigen::Map<const Vec9>(F.data()); }
inline Mat3 unvec(const Vec9& v) { return Eigen::Map<const Mat3>(v.data()); }

} // namespace simplicits
