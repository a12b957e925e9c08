#pragma once

#include "simplicits/mlp.hpp"
#include "simplicits/occupancy.hpp"

#include <vector>

namespace simplicits {

/// Position of the (row r, column k) entry of handle j inside z, written with
/// the handle-local column q = 4 j + k.
inline Eigen::Index z_index(int r, int q) { return 12 * (q / 4) + 4 * r + q % 4; }

/// Fixed Monte-Carlo integration points with everything the time stepper needs
/// cached, so the network is never evaluated while stepping.
///
/// Per point the deformation is x_i = X_i + B_i z with
/// B_i(r, z_index(r, q)) = b_i(q), b_i(4 j + k) = w_j [X_i; 1]_k, and the
/// deformation gradient is F_i = I + Zbar G_i, where Zbar(r, q) = z[z_index(r, q)]
/// and G_i (4n x 3) holds G_i(4 j + k, c) = w_j delta_kc + [X_i; 1]_k dw_j/dx_c.
struct CubatureSet {
  int n_handles = 0;
  double volume = 0.0;
  std::vector<Vec3> X;
  std::vector<double> occupancy;
  std::vector<double> mass; // rho_i V / p
  std::vector<double> lambda;
  std::vector<double> mu;
  MatrixX W;     // p x n
  MatrixX gradW; // p x 3n, column 3 j + c = dw_j/dx_c
  MatrixX b;     // p x 4n, the shared row pattern of B_i
  std::vector<MatrixX> G; // 4n x 3 per point

  std::size_t size() const { return X.size(); }
  int dofs() const { return 12 * n_handles; }

  /// Explicit 3 x 12n block B_i.
  MatrixX basis_block(std::size_t i) const;
  /// Stacked (3p) x (12n) basis.
  MatrixX basis() const;

  Vec3 position(std::size_t i, const VectorX& z) const;
  Mat3 deformation_gradient(std::size_t i, const VectorX& z) const;
};

/// The 3 x 4n matrix Zbar with Zbar(r, q) = z[z_index(r, q)].
MatrixX handle_rows(const VectorX& z, int n_handles);

/// Builds a cubature set from given points. Weight gradients use central
/// differences with default_fd_step(net).
CubatureSet make_cubature(const SkinningField& net, const std::vector<SamplePoint>& points,
                          double volume, Exec exec = Exec::parallel);

/// Samples `count` interior points (count >= 4n) and caches the basis.
CubatureSet build_cubature(const OccupancyField& field, const SkinningField& net,
                           std::size_t count, std::uint64_t seed, std::size_t volume_samples,
                           Exec exec = Exec::parallel);

/// M = sum_i m_i B_i^T B_i, (12n) x (12n).
MatrixX build_mass_matrix(const CubatureSet& cub, Exec exec = Exec::parallel);

} // namespace simplicits
