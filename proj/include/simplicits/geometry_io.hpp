#pragma once

#include "simplicits/common.hpp"

#include <array>
#include <filesystem>
#include <vector>

namespace simplicits {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
};

/// Regular scalar grid with node (i, j, k) at origin + (i, j, k) * spacing.
/// Values are stored x-fastest.
struct ScalarGrid {
  std::array<std::uint32_t, 3> dims{0, 0, 0};
  Vec3 origin = Vec3::Zero();
  Vec3 spacing = Vec3::Ones();
  std::vector<float> values;

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return i + dims[0] * (j + dims[1] * k);
  }
  Vec3 node(std::size_t i, std::size_t j, std::size_t k) const {
    return origin + Vec3(double(i), double(j), double(k)).cwiseProduct(spacing);
  }
};

/// Wavefront OBJ: `v` and triangular `f` records; everything else is skipped.
TriangleMesh read_obj(const std::filesystem::path& path);
void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);

/// Whitespace separated "x y z" per line. Blank lines and '#' comments skipped.
std::vector<Vec3> read_xyz(const std::filesystem::path& path);
/// One "x y z" line per point, 17 significant digits.
void write_xyz(const std::filesystem::path& path, const std::vector<Vec3>& points);

/// SVOL v1: "SVOL", u32 version, u32 nx ny nz, 3 f64 origin, 3 f64 spacing,
/// nx*ny*nz f32 values, all little-endian.
ScalarGrid read_svol(const std::filesystem::path& path);
void write_svol(const std::filesystem::path& path, const ScalarGrid& grid);

} // namespace simplicits
