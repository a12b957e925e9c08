#include "simplicits/reference.hpp"

#include <cmath>
#include <limits>

namespace simplicits::reference {

MatrixX forward(const SkinningField& net, std::span<const Vec3> X) {
  const auto theta = net.params();
  MatrixX out(Eigen::Index(X.size()), net.n_handles());
  for (std::size_t i = 0; i < X.size(); ++i) {
    const Vec3 u = net.normalize(X[i]);
    std::vector<double> a(u.data(), u.data() + 3);
    for (int l = 0; l < net.layer_count(); ++l) {
      std::vector<double> next(std::size_t(net.layer_out(l)));
      for (int o = 0; o < net.layer_out(l); ++o) {
        double s = theta[net.bias_offset(l) + std::size_t(o)];
        for (int k = 0; k < net.layer_in(l); ++k) {
          s += theta[net.weight_offset(l) + std::size_t(o * net.layer_in(l) + k)] * a[std::size_t(k)];
        }
        next[std::size_t(o)] = l + 1 < net.layer_count() ? elu(s) : s;
      }
      a = std::move(next);
    }
    for (int j = 0; j < net.n_handles(); ++j) out(Eigen::Index(i), j) = a[std::size_t(j)];
  }
  return out;
}

MatrixX basis_block(const CubatureSet& cub, std::size_t i) {
  const auto ii = Eigen::Index(i);
  const Eigen::Vector4d Xh(cub.X[i].x(), cub.X[i].y(), cub.X[i].z(), 1.0);
  MatrixX B = MatrixX::Zero(3, cub.dofs());
  for (int j = 0; j < cub.n_handles; ++j)
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 4; ++k) B(r, HandleTransforms::index(j, r, k)) = cub.W(ii, j) * Xh(k);
  return B;
}

MatrixX jacobian_block(const CubatureSet& cub, std::size_t i) {
  // F(r, c) = delta_rc + sum_j (w_j Z_j(r, c) + (Z_j [X; 1])_r dw_j/dx_c).
  const auto ii = Eigen::Index(i);
  const Eigen::Vector4d Xh(cub.X[i].x(), cub.X[i].y(), cub.X[i].z(), 1.0);
  MatrixX J = MatrixX::Zero(9, cub.dofs());
  for (int j = 0; j < cub.n_handles; ++j)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        const int row = 3 * c + r;
        J(row, HandleTransforms::index(j, r, c)) += cub.W(ii, j);
        for (int k = 0; k < 4; ++k) {
          J(row, HandleTransforms::index(j, r, k)) += Xh(k) * cub.gradW(ii, 3 * j + c);
        }
      }
  return J;
}

MatrixX mass_matrix(const CubatureSet& cub) {
  MatrixX M = MatrixX::Zero(cub.dofs(), cub.dofs());
  for (std::size_t i = 0; i < cub.size(); ++i) {
    const MatrixX B = basis_block(cub, i);
    M += cub.mass[i] * B.transpose() * B;
  }
  return M;
}

Assembly assemble(const ReducedSim& sim, const VectorX& z, const StepContext& ctx) {
  const CubatureSet& cub = sim.cubature();
  const SimConfig& cfg = sim.config();
  const double h2 = cfg.dt * cfg.dt;
  const double weight = cub.volume / double(cub.size());
  const VectorX d = z - ctx.z_tilde;

  Assembly a;
  a.objective = 0.5 * d.dot(sim.mass() * d);
  a.gradient = sim.mass() * d;
  a.hessian = sim.mass();
  Vec9 id = Vec9::Zero();
  id(0) = id(4) = id(8) = 1.0;
  for (std::size_t i = 0; i < cub.size(); ++i) {
    const MatrixX B = basis_block(cub, i);
    const MatrixX J = jacobian_block(cub, i);
    const Vec9 f = id + J * z;
    const Mat3 F = Eigen::Map<const Mat3>(f.data());
    const Vec3 x = cub.X[i] + B * z;
    const double ci = weight * cub.occupancy[i];
    const PointLoad load = sim.point_load(i, x, ctx, true);
    if (!std::isfinite(load.energy)) {
      a.objective = std::numeric_limits<double>::infinity();
      return a;
    }
    a.objective += h2 * (ci * psi(cfg.energy, F, cub.lambda[i], cub.mu[i]) + load.energy);
    const Mat3 P = psi_gradient(cfg.energy, F, cub.lambda[i], cub.mu[i]);
    const Vec9 Pv = Eigen::Map<const Vec9>(P.data());
    a.gradient += h2 * (ci * J.transpose() * Pv + B.transpose() * load.force);
    const Mat9 H = psi_hessian(cfg.energy, F, cub.lambda[i], cub.mu[i]);
    a.hessian += h2 * (ci * J.transpose() * H * J + B.transpose() * load.stiffness * B);
  }
  a.hessian = 0.5 * (a.hessian + a.hessian.transpose()).eval();
  return a;
}

} // namespace simplicits::reference
