#include "simplicits/exporters.hpp"

#include "binary_io.hpp"

#include <Eigen/Eigenvalues>

#include <fstream>
#include <sstream>

namespace simplicits {

namespace {

constexpr std::array<std::pair<int, int>, 6> kUpper{{{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}}};

Vec3 mapped(const MatrixX& W, Eigen::Index row, const HandleTransforms& Z, const Vec3& X) {
  return deformation_map(W.row(row).transpose(), Z, X);
}

} // namespace

GaussianSplatSet read_splats(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path.string() + "'");
  const std::string what = path.string();
  binary::expect_magic(in, "SPLT", what);
  const auto count = binary::get<std::uint32_t>(in, what);
  GaussianSplatSet set;
  set.splats.reserve(count);
  for (std::uint32_t s = 0; s < count; ++s) {
    GaussianSplat g;
    for (int k = 0; k < 3; ++k) g.mean[k] = binary::get<float>(in, what);
    for (const auto& [r, c] : kUpper) g.cov(r, c) = g.cov(c, r) = binary::get<float>(in, what);
    g.opacity = binary::get<float>(in, what);
    const auto len = binary::get<std::uint32_t>(in, what);
    g.payload.resize(len);
    if (len > 0 && !in.read(reinterpret_cast<char*>(g.payload.data()), std::streamsize(len))) {
      throw InputError(what + ": truncated splat payload");
    }
    if (!g.mean.allFinite() || !g.cov.allFinite()) {
      throw InputError(what + ": splat " + std::to_string(s) + " is not finite");
    }
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(g.cov, Eigen::EigenvaluesOnly);
    const double scale = eig.eigenvalues().cwiseAbs().maxCoeff();
    if (eig.eigenvalues().minCoeff() < -1e-6 * scale) {
      throw InputError(what + ": splat " + std::to_string(s) +
                       " covariance is not positive semidefinite");
    }
    set.splats.push_back(std::move(g));
  }
  return set;
}

void write_splats(const std::filesystem::path& path, const GaussianSplatSet& set) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  binary::put_magic(out, "SPLT");
  binary::put<std::uint32_t>(out, std::uint32_t(set.splats.size()));
  for (const auto& g : set.splats) {
    for (int k = 0; k < 3; ++k) binary::put<float>(out, float(g.mean[k]));
    for (const auto& [r, c] : kUpper) binary::put<float>(out, float(g.cov(r, c)));
    binary::put<float>(out, g.opacity);
    binary::put<std::uint32_t>(out, std::uint32_t(g.payload.size()));
    out.write(reinterpret_cast<const char*>(g.payload.data()), std::streamsize(g.payload.size()));
  }
  if (!out) throw InputError("write failed for '" + path.string() + "'");
}

TriangleMesh deform_mesh(const TriangleMesh& rest, const SkinningField& net,
                         const HandleTransforms& Z, Exec exec) {
  TriangleMesh out = rest;
  const MatrixX W = net.forward_batch(rest.vertices, exec);
  for (std::size_t v = 0; v < rest.vertices.size(); ++v) {
    out.vertices[v] = mapped(W, Eigen::Index(v), Z, rest.vertices[v]);
  }
  return out;
}

GaussianSplatSet transform_gaussians(const GaussianSplatSet& set, const SkinningField& net,
                                     const HandleTransforms& Z, Exec exec) {
  const double h = default_fd_step(net);
  const std::size_t count = set.splats.size();
  std::vector<Vec3> probes;
  probes.reserve(7 * count);
  for (const auto& g : set.splats) {
    probes.push_back(g.mean);
    for (int k = 0; k < 3; ++k) {
      probes.push_back(g.mean + h * Vec3::Unit(k));
      probes.push_back(g.mean - h * Vec3::Unit(k));
    }
  }
  const MatrixX W = net.forward_batch(probes, exec);

  GaussianSplatSet out = set;
  for_each_index(exec, chunk_count(count), [&](std::size_t c) {
    const std::size_t end = std::min(count, (c + 1) * kPointChunk);
    for (std::size_t s = c * kPointChunk; s < end; ++s) {
      const auto base = Eigen::Index(7 * s);
      Mat3 F;
      for (int k = 0; k < 3; ++k) {
        const Vec3 plus = mapped(W, base + 1 + 2 * k, Z, probes[std::size_t(base + 1 + 2 * k)]);
        const Vec3 minus = mapped(W, base + 2 + 2 * k, Z, probes[std::size_t(base + 2 + 2 * k)]);
        F.col(k) = (plus - minus) / (2.0 * h);
      }
      GaussianSplat& g = out.splats[s];
      g.mean = mapped(W, base, Z, set.splats[s].mean);
      const Mat3 cov = F * set.splats[s].cov * F.transpose();
      g.cov = 0.5 * (cov + cov.transpose());
    }
  });
  return out;
}

std::vector<ScalarGrid> weight_grids(const SkinningField& net, const Aabb& bbox,
                                     std::array<std::uint32_t, 3> res, Exec exec) {
  for (auto r : res) {
    if (r < 2) throw InputError("weight grid resolution must be >= 2 per axis");
  }
  ScalarGrid grid;
  grid.dims = res;
  grid.origin = bbox.lo;
  for (int k = 0; k < 3; ++k) grid.spacing[k] = bbox.extent()[k] / double(res[std::size_t(k)] - 1);
  if (!(grid.spacing.array() > 0.0).all()) throw InputError("weight grid box must have positive extent");

  std::vector<Vec3> nodes;
  nodes.reserve(std::size_t(res[0]) * res[1] * res[2]);
  for (std::uint32_t k = 0; k < res[2]; ++k)
    for (std::uint32_t j = 0; j < res[1]; ++j)
      for (std::uint32_t i = 0; i < res[0]; ++i) nodes.push_back(grid.node(i, j, k));
  const MatrixX W = net.forward_batch(nodes, exec);

  std::vector<ScalarGrid> out(std::size_t(net.n_handles()), grid);
  for (int j = 0; j < net.n_handles(); ++j) {
    auto& values = out[std::size_t(j)].values;
    values.resize(nodes.size());
    for (std::size_t v = 0; v < nodes.size(); ++v) values[v] = float(W(Eigen::Index(v), j));
  }
  return out;
}

std::vector<std::filesystem::path> export_weight_grid(const SkinningField& net, const Aabb& bbox,
                                                      std::array<std::uint32_t, 3> res,
                                                      const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto grids = weight_grids(net, bbox, res);
  std::vector<std::filesystem::path> paths;
  for (std::size_t j = 0; j < grids.size(); ++j) {
    paths.push_back(dir / ("weights_" + std::to_string(j) + ".svol"));
    write_svol(paths.back(), grids[j]);
  }
  return paths;
}

std::string transforms_csv_header(int n_handles) {
  std::string s = "frame,time";
  for (int i = 0; i < 12 * n_handles; ++i) s += ",z" + std::to_string(i);
  return s + "\n";
}

std::string transforms_csv_row(int frame, double time, const VectorX& z) {
  std::ostringstream out;
  out.precision(17);
  out << frame << ',' << time;
  for (Eigen::Index i = 0; i < z.size(); ++i) out << ',' << z(i);
  out << '\n';
  return out.str();
}

} // namespace simplicits
