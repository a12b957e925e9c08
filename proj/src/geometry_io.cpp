#include "simplicits/geometry_io.hpp"

#include "binary_io.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace simplicits {

namespace {

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = {}) {
  std::ifstream in(path, std::ios::in | mode);
  if (!in) throw InputError("cannot read '" + path.string() + "'");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = {}) {
  std::ofstream out(path, std::ios::out | std::ios::trunc | mode);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  return out;
}

// OBJ vertex references: "7", "7/1", "7//3", "-1".
int parse_face_index(const std::string& token, std::size_t vertex_count, const std::string& where) {
  const std::string head = token.substr(0, token.find('/'));
  int value = 0;
  auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), value);
  if (ec != std::errc{} || ptr != head.data() + head.size() || value == 0) {
    throw InputError(where + ": bad face index '" + token + "'");
  }
  const long resolved = value > 0 ? value - 1 : static_cast<long>(vertex_count) + value;
  if (resolved < 0 || resolved >= static_cast<long>(vertex_count)) {
    throw InputError(where + ": face index out of range '" + token + "'");
  }
  return static_cast<int>(resolved);
}

} // namespace

TriangleMesh read_obj(const std::filesystem::path& path) {
  auto in = open_in(path);
  TriangleMesh mesh;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (tag == "v") {
      Vec3 v;
      if (!(ss >> v.x() >> v.y() >> v.z())) throw InputError(where + ": bad vertex");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<std::string> refs;
      for (std::string tok; ss >> tok;) refs.push_back(tok);
      if (refs.size() != 3) throw InputError(where + ": only triangular faces are supported");
      std::array<int, 3> f{};
      for (int k = 0; k < 3; ++k) f[k] = parse_face_index(refs[k], mesh.vertices.size(), where);
      mesh.faces.push_back(f);
    }
  }
  return mesh;
}

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  auto out = open_out(path);
  out << std::setprecision(17);
  for (const Vec3& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  if (!out) throw InputError("write failed for '" + path.string() + "'");
}

std::vector<Vec3> read_xyz(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<Vec3> points;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    Vec3 p;
    if (!(ss >> p.x() >> p.y() >> p.z())) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected 'x y z'");
    }
    points.push_back(p);
  }
  return points;
}

void write_xyz(const std::filesystem::path& path, const std::vector<Vec3>& points) {
  auto out = open_out(path);
  out << std::setprecision(17);
  for (const Vec3& p : points) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  if (!out) throw InputError("write failed for '" + path.string() + "'");
}

ScalarGrid read_svol(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::binary);
  const std::string what = path.string();
  binary::expect_magic(in, "SVOL", what);
  const auto version = binary::get<std::uint32_t>(in, what);
  if (version != 1) throw InputError(what + ": unsupported SVOL version " + std::to_string(version));
  ScalarGrid grid;
  for (auto& d : grid.dims) d = binary::get<std::uint32_t>(in, what);
  for (int k = 0; k < 3; ++k) grid.origin[k] = binary::get<double>(in, what);
  for (int k = 0; k < 3; ++k) grid.spacing[k] = binary::get<double>(in, what);
  if (!(grid.spacing.array() > 0.0).all()) throw InputError(what + ": spacing must be positive");
  const std::size_t count = std::size_t(grid.dims[0]) * grid.dims[1] * grid.dims[2];
  grid.values.resize(count);
  for (auto& v : grid.values) v = binary::get<float>(in, what);
  return grid;
}

void write_svol(const std::filesystem::path& path, const ScalarGrid& grid) {
  if (grid.values.size() != std::size_t(grid.dims[0]) * grid.dims[1] * grid.dims[2]) {
    throw InputError("write_svol: value count does not match grid dimensions");
  }
  auto out = open_out(path, std::ios::binary);
  binary::put_magic(out, "SVOL");
  binary::put<std::uint32_t>(out, 1);
  for (auto d : grid.dims) binary::put<std::uint32_t>(out, d);
  for (int k = 0; k < 3; ++k) binary::put<double>(out, grid.origin[k]);
  for (int k = 0; k < 3; ++k) binary::put<double>(out, grid.spacing[k]);
  for (float v : grid.values) binary::put<float>(out, v);
  if (!out) throw InputError("write failed for '" + path.string() + "'");
}

} // namespace simplicits
