#pragma once

#include "simplicits/elastic.hpp"
#include "simplicits/geometry_io.hpp"
#include "simplicits/mlp.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace simplicits {

struct GaussianSplat {
  Vec3 mean = Vec3::Zero();
  Mat3 cov = Mat3::Identity();
  float opacity = 1.0f;
  std::vector<std::uint8_t> payload; // color data, carried through untouched
};

struct GaussianSplatSet {
  std::vector<GaussianSplat> splats;
};

/// SPLT: "SPLT", u32 count, then per splat 3 f32 mean, 6 f32 covariance
/// (xx xy xz yy yz zz), f32 opacity, u32 payload length, payload bytes.
/// Loading rejects covariances that are not positive semidefinite.
GaussianSplatSet read_splats(const std::filesystem::path& path);
void write_splats(const std::filesystem::path& path, const GaussianSplatSet& set);

/// Vertices mapped through the deformation; faces copied.
TriangleMesh deform_mesh(const TriangleMesh& rest, const SkinningField& net,
                         const HandleTransforms& Z, Exec exec = Exec::parallel);

/// mean' = phi(mean), cov' = F cov F^T with F from central differences,
/// re-symmetrized.
GaussianSplatSet transform_gaussians(const GaussianSplatSet& set, const SkinningField& net,
                                     const HandleTransforms& Z, Exec exec = Exec::parallel);

/// One grid per handle sampling w_j on res[0] x res[1] x res[2] nodes spanning bbox.
std::vector<ScalarGrid> weight_grids(const SkinningField& net, const Aabb& bbox,
                                     std::array<std::uint32_t, 3> res, Exec exec = Exec::parallel);
/// Writes weights_<j>.svol into dir and returns the paths.
std::vector<std::filesystem::path> export_weight_grid(const SkinningField& net, const Aabb& bbox,
                                                      std::array<std::uint32_t, 3> res,
                                                      const std::filesystem::path& dir);

/// Frame transforms CSV: frame, time, z0 ... z(12n - 1).
std::string transforms_csv_header(int n_handles);
std::string transforms_csv_row(int frame, double time, const VectorX& z);

} // namespace simplicits
