#include "simplicits/cubature.hpp"

#include "simplicits/elastic.hpp"

namespace simplicits {

MatrixX CubatureSet::basis_block(std::size_t i) const {
  MatrixX B = MatrixX::Zero(3, dofs());
  for (int r = 0; r < 3; ++r)
    for (int q = 0; q < 4 * n_handles; ++q) B(r, z_index(r, q)) = b(Eigen::Index(i), q);
  return B;
}

MatrixX CubatureSet::basis() const {
  MatrixX B(3 * Eigen::Index(size()), dofs());
  for (std::size_t i = 0; i < size(); ++i) B.middleRows(3 * Eigen::Index(i), 3) = basis_block(i);
  return B;
}

MatrixX handle_rows(const VectorX& z, int n_handles) {
  if (z.size() != 12 * n_handles) throw InputError("handle vector length must be 12 n");
  MatrixX Zbar(3, 4 * n_handles);
  for (int r = 0; r < 3; ++r)
    for (int q = 0; q < 4 * n_handles; ++q) Zbar(r, q) = z(z_index(r, q));
  return Zbar;
}

Vec3 CubatureSet::position(std::size_t i, const VectorX& z) const {
  return X[i] + handle_rows(z, n_handles) * b.row(Eigen::Index(i)).transpose();
}

Mat3 CubatureSet::deformation_gradient(std::size_t i, const VectorX& z) const {
  return Mat3::Identity() + handle_rows(z, n_handles) * G[i];
}

CubatureSet make_cubature(const SkinningField& net, const std::vector<SamplePoint>& points,
                          double volume, Exec exec) {
  if (points.empty()) throw InputError("cubature needs at least one point");
  if (!(volume > 0.0)) throw InputError("cubature volume must be positive");
  const int n = net.n_handles();
  const std::size_t p = points.size();
  const double h = default_fd_step(net);

  CubatureSet cub;
  cub.n_handles = n;
  cub.volume = volume;
  std::vector<Vec3> probes;
  probes.reserve(6 * p);
  for (const auto& s : points) {
    cub.X.push_back(s.X);
    cub.occupancy.push_back(s.occupancy);
    cub.mass.push_back(s.density * volume / double(p));
    cub.lambda.push_back(s.lambda);
    cub.mu.push_back(s.mu);
    for (int c = 0; c < 3; ++c) {
      probes.push_back(s.X + h * Vec3::Unit(c));
      probes.push_back(s.X - h * Vec3::Unit(c));
    }
  }
  cub.W = net.forward_batch(cub.X, exec);
  const MatrixX Wp = net.forward_batch(probes, exec);

  cub.gradW.resize(Eigen::Index(p), 3 * n);
  cub.b.resize(Eigen::Index(p), 4 * n);
  cub.G.assign(p, MatrixX());
  for_each_index(exec, chunk_count(p), [&](std::size_t chunk) {
    const std::size_t end = std::min(p, (chunk + 1) * kPointChunk);
    for (std::size_t i = chunk * kPointChunk; i < end; ++i) {
      const auto ii = Eigen::Index(i);
      const Eigen::Vector4d Xh(cub.X[i].x(), cub.X[i].y(), cub.X[i].z(), 1.0);
      MatrixX G = MatrixX::Zero(4 * n, 3);
      for (int j = 0; j < n; ++j) {
        const double w = cub.W(ii, j);
        for (int c = 0; c < 3; ++c) {
          const double dw = (Wp(6 * ii + 2 * c, j) - Wp(6 * ii + 2 * c + 1, j)) / (2.0 * h);
          cub.gradW(ii, 3 * j + c) = dw;
          for (int k = 0; k < 4; ++k) G(4 * j + k, c) += Xh(k) * dw;
          G(4 * j + c, c) += w;
        }
        for (int k = 0; k < 4; ++k) cub.b(ii, 4 * j + k) = w * Xh(k);
      }
      cub.G[i] = std::move(G);
    }
  });
  return cub;
}

CubatureSet build_cubature(const OccupancyField& field, const SkinningField& net,
                           std::size_t count, std::uint64_t seed, std::size_t volume_samples,
                           Exec exec) {
  if (count < std::size_t(4 * net.n_handles())) {
    throw InputError("cubature count must be at least 4 per handle (got " +
                     std::to_string(count) + " for " + std::to_string(net.n_handles()) +
                     " handles)");
  }
  const double volume = estimate_volume(field, volume_samples, mix_seed(seed, 1), exec).volume;
  return make_cubature(net, sample_interior(field, count, mix_seed(seed, 0), exec), volume, exec);
}

MatrixX build_mass_matrix(const CubatureSet& cub, Exec exec) {
  const int n = cub.n_handles;
  const std::size_t p = cub.size();
  const std::size_t chunks = chunk_count(p);
  std::vector<MatrixX> partial(chunks);
  for_each_index(exec, chunks, [&](std::size_t c) {
    const auto begin = Eigen::Index(c * kPointChunk);
    const auto len = Eigen::Index(std::min(kPointChunk, p - c * kPointChunk));
    const auto rows = cub.b.middleRows(begin, len);
    const Eigen::Map<const VectorX> m(cub.mass.data() + begin, len);
    partial[c] = rows.transpose() * m.asDiagonal() * rows;
  });
  MatrixX Mhat = partial.empty() ? MatrixX::Zero(4 * n, 4 * n) : tree_sum(std::move(partial));
  Mhat = 0.5 * (Mhat + Mhat.transpose()).eval();
  MatrixX M = MatrixX::Zero(cub.dofs(), cub.dofs());
  for (int r = 0; r < 3; ++r)
    for (int q = 0; q < 4 * n; ++q)
      for (int q2 = 0; q2 < 4 * n; ++q2) M(z_index(r, q), z_index(r, q2)) = Mhat(q, q2);
  return M;
}

} // namespace simplicits
