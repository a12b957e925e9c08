#include "simplicits/elastic.hpp"

#include <cmath>

namespace simplicits {

namespace {

// dJ/dF; columns are cross products of the other two columns of F.
Mat3 cofactor(const Mat3& F) {
  Mat3 c;
  c.col(0) = F.col(1).cross(F.col(2));
  c.col(1) = F.col(2).cross(F.col(0));
  c.col(2) = F.col(0).cross(F.col(1));
  return c;
}

// Directional derivative of cofactor(F) along dF.
Mat3 cofactor_derivative(const Mat3& F, const Mat3& dF) {
  Mat3 c;
  c.col(0) = dF.col(1).cross(F.col(2)) + F.col(1).cross(dF.col(2));
  c.col(1) = dF.col(2).cross(F.col(0)) + F.col(2).cross(dF.col(0));
  c.col(2) = dF.col(0).cross(F.col(1)) + F.col(0).cross(dF.col(1));
  return c;
}

Mat3 green_strain(const Mat3& F) { return 0.5 * (F.transpose() * F - Mat3::Identity()); }

Mat3 linear_stress(const Mat3& F, double lambda, double mu) {
  const Mat3 E = green_strain(F);
  return F * (2.0 * mu * E + lambda * E.trace() * Mat3::Identity());
}

Mat3 linear_stress_derivative(const Mat3& F, const Mat3& dF, double lambda, double mu) {
  const Mat3 E = green_strain(F);
  const Mat3 S = 2.0 * mu * E + lambda * E.trace() * Mat3::Identity();
  const Mat3 dE = 0.5 * (dF.transpose() * F + F.transpose() * dF);
  const Mat3 dS = 2.0 * mu * dE + lambda * dE.trace() * Mat3::Identity();
  return dF * S + F * dS;
}

// P = mu F + c(J) cof(F), with c(J) = lambda (J - 1) + shift.
Mat3 neo_stress(const Mat3& F, double lambda, double mu, double shift) {
  const double J = F.determinant();
  return mu * F + (lambda * (J - 1.0) + shift) * cofactor(F);
}

Mat3 neo_stress_derivative(const Mat3& F, const Mat3& dF, double lambda, double mu, double shift) {
  const double J = F.determinant();
  const Mat3 cof = cofactor(F);
  return mu * dF + lambda * cof.cwiseProduct(dF).sum() * cof +
         (lambda * (J - 1.0) + shift) * cofactor_derivative(F, dF);
}

template <class Directional>
Mat9 assemble_hessian(Directional&& dP) {
  Mat9 H;
  for (int col = 0; col < 9; ++col) {
    Mat3 dF = Mat3::Zero();
    dF(col % 3, col / 3) = 1.0;
    H.col(col) = vec(dP(dF));
  }
  return 0.5 * (H + H.transpose());
}

} // namespace

HandleTransforms::HandleTransforms(int n, VectorX z) : n_(n), z_(std::move(z)) {
  if (n_ < 0 || z_.size() != 12 * n_) throw InputError("handle vector length must be 12 n");
}

Mat34 HandleTransforms::handle(int j) const {
  Mat34 Z;
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 4; ++k) Z(r, k) = z_(index(j, r, k));
  return Z;
}

void HandleTransforms::set_handle(int j, const Mat34& Z) {
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 4; ++k) z_(index(j, r, k)) = Z(r, k);
}

Vec3 deformation_map(const VectorX& w, const HandleTransforms& Z, const Vec3& X) {
  if (w.size() != Z.n()) throw InputError("deformation_map: weight count does not match handles");
  Vec3 x = X;
  const Eigen::Vector4d Xh(X.x(), X.y(), X.z(), 1.0);
  for (int j = 0; j < Z.n(); ++j) x += w(j) * (Z.handle(j) * Xh);
  return x;
}

Mat3 deformation_gradient_analytic(const VectorX& w, const MatrixX& grad_w,
                                   const HandleTransforms& Z, const Vec3& X) {
  if (w.size() != Z.n() || grad_w.rows() != Z.n() || grad_w.cols() != 3) {
    throw InputError("deformation_gradient_analytic: shape mismatch");
  }
  Mat3 F = Mat3::Identity();
  const Eigen::Vector4d Xh(X.x(), X.y(), X.z(), 1.0);
  for (int j = 0; j < Z.n(); ++j) {
    const Mat34 Zj = Z.handle(j);
    F += w(j) * Zj.leftCols<3>() + (Zj * Xh) * grad_w.row(j);
  }
  return F;
}

Mat3 deformation_gradient_fd(const SkinningField& net, const HandleTransforms& Z, const Vec3& X,
                             double h) {
  if (!(h > 0.0)) throw InputError("finite-difference step must be positive");
  std::vector<Vec3> probes;
  probes.reserve(6);
  for (int k = 0; k < 3; ++k) {
    probes.push_back(X + h * Vec3::Unit(k));
    probes.push_back(X - h * Vec3::Unit(k));
  }
  const MatrixX w = net.forward_batch(probes, Exec::serial);
  Mat3 F;
  for (int k = 0; k < 3; ++k) {
    const Vec3 plus = deformation_map(w.row(2 * k).transpose(), Z, probes[2 * k]);
    const Vec3 minus = deformation_map(w.row(2 * k + 1).transpose(), Z, probes[2 * k + 1]);
    F.col(k) = (plus - minus) / (2.0 * h);
  }
  return F;
}

MatrixX weight_gradient_fd(const SkinningField& net, const Vec3& X, double h) {
  if (!(h > 0.0)) throw InputError("finite-difference step must be positive");
  std::vector<Vec3> probes;
  for (int k = 0; k < 3; ++k) {
    probes.push_back(X + h * Vec3::Unit(k));
    probes.push_back(X - h * Vec3::Unit(k));
  }
  const MatrixX w = net.forward_batch(probes, Exec::serial);
  MatrixX g(net.n_handles(), 3);
  for (int k = 0; k < 3; ++k) g.col(k) = (w.row(2 * k) - w.row(2 * k + 1)).transpose() / (2.0 * h);
  return g;
}

std::string to_string(EnergyKind kind) {
  switch (kind) {
  case EnergyKind::linear: return "linear";
  case EnergyKind::neohookean: return "neohookean";
  case EnergyKind::stable_neohookean: return "stable_neohookean";
  }
  return "?";
}

EnergyKind energy_kind_from_string(const std::string& name) {
  for (auto k : {EnergyKind::linear, EnergyKind::neohookean, EnergyKind::stable_neohookean}) {
    if (to_string(k) == name) return k;
  }
  throw InputError("unknown energy '" + name + "'");
}

double psi_linear(const Mat3& F, double lambda, double mu) {
  const Mat3 E = green_strain(F);
  const double tr = E.trace();
  return mu * (E.transpose() * E).trace() + 0.5 * lambda * tr * tr;
}

double psi_neohookean_paper(const Mat3& F, double lambda, double mu) {
  const double I1 = F.squaredNorm();
  const double J = F.determinant();
  return 0.5 * mu * (I1 - 3.0) + 0.5 * lambda * (J - 1.0) * (J - 1.0);
}

double psi_stable_neohookean(const Mat3& F, double lambda, double mu) {
  const double Ic = F.squaredNorm();
  const double J = F.determinant();
  return 0.5 * mu * (Ic - 3.0) - mu * (J - 1.0) + 0.5 * lambda * (J - 1.0) * (J - 1.0);
}

double scheduled_energy(const Mat3& F, double lambda, double mu, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("energy schedule alpha must lie in [0, 1]");
  if (alpha == 0.0) return psi_linear(F, lambda, mu);
  if (alpha == 1.0) return psi_neohookean_paper(F, lambda, mu);
  return (1.0 - alpha) * psi_linear(F, lambda, mu) + alpha * psi_neohookean_paper(F, lambda, mu);
}

Mat3 scheduled_gradient(const Mat3& F, double lambda, double mu, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("energy schedule alpha must lie in [0, 1]");
  return (1.0 - alpha) * linear_stress(F, lambda, mu) + alpha * neo_stress(F, lambda, mu, 0.0);
}

double psi(EnergyKind kind, const Mat3& F, double lambda, double mu) {
  switch (kind) {
  case EnergyKind::linear: return psi_linear(F, lambda, mu);
  case EnergyKind::neohookean: return psi_neohookean_paper(F, lambda, mu);
  case EnergyKind::stable_neohookean: return psi_stable_neohookean(F, lambda, mu);
  }
  return 0.0;
}

Mat3 psi_gradient(EnergyKind kind, const Mat3& F, double lambda, double mu) {
  switch (kind) {
  case EnergyKind::linear: return linear_stress(F, lambda, mu);
  case EnergyKind::neohookean: return neo_stress(F, lambda, mu, 0.0);
  case EnergyKind::stable_neohookean: return neo_stress(F, lambda, mu, -mu);
  }
  return Mat3::Zero();
}

Mat9 psi_hessian(EnergyKind kind, const Mat3& F, double lambda, double mu) {
  switch (kind) {
  case EnergyKind::linear:
    return assemble_hessian([&](const Mat3& dF) { return linear_stress_derivative(F, dF, lambda, mu); });
  case EnergyKind::neohookean:
    return assemble_hessian(
        [&](const Mat3& dF) { return neo_stress_derivative(F, dF, lambda, mu, 0.0); });
  case EnergyKind::stable_neohookean:
    return assemble_hessian(
        [&](const Mat3& dF) { return neo_stress_derivative(F, dF, lambda, mu, -mu); });
  }
  return Mat9::Zero();
}

} // namespace simplicits
