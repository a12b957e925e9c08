#include "simplicits/occupancy.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace simplicits;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "simplicits_unit";
  fs::create_directories(dir);
  return dir / name;
}

GeometrySpec sphere_spec(double r, double padding = 0.05) {
  GeometrySpec s;
  s.kind = GeometrySpec::Kind::sphere;
  s.radius = r;
  s.padding = padding;
  return s;
}

GeometrySpec unit_cube_spec(double padding) {
  GeometrySpec s;
  s.kind = GeometrySpec::Kind::box;
  s.lo = Vec3::Zero();
  s.hi = Vec3::Ones();
  s.padding = padding;
  return s;
}

TriangleMesh unit_cube_mesh() {
  TriangleMesh m;
  for (int k = 0; k < 8; ++k) m.vertices.emplace_back(k & 1, (k >> 1) & 1, (k >> 2) & 1);
  // Outward-facing triangles, two per face.
  m.faces = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
             {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return m;
}

TriangleMesh octahedron_mesh() {
  TriangleMesh m;
  m.vertices = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (int sx : {0, 1})
    for (int sy : {2, 3})
      for (int sz : {4, 5}) m.faces.push_back({sx, sy, sz});
  return m;
}

} // namespace

TEST_SUITE("occupancy") {

TEST_CASE("lame_from_young_poisson hand values") {
  auto l = lame_from_young_poisson(1.0, 0.0);
  CHECK(l.lambda == 0.0);
  CHECK(l.mu == doctest::Approx(0.5));
  l = lame_from_young_poisson(2.0, 0.25);
  CHECK(l.lambda == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(l.mu == doctest::Approx(0.8).epsilon(1e-14));
  // E nu / ((1 + nu)(1 - 2 nu)) = 2.25e6 / 0.145; E / 2.9.
  l = lame_from_young_poisson(5e6, 0.45);
  CHECK(l.lambda == doctest::Approx(2.25e6 / 0.145).epsilon(1e-14));
  CHECK(l.mu == doctest::Approx(5e6 / 2.9).epsilon(1e-14));
  CHECK(l.mu == doctest::Approx(1.7241e6).epsilon(1e-4));
  CHECK_THROWS_AS(lame_from_young_poisson(1.0, 0.5), InputError);
  CHECK_THROWS_AS(lame_from_young_poisson(0.0, 0.3), InputError);
  CHECK_THROWS_AS(lame_from_young_poisson(1.0, -0.1), InputError);
}

TEST_CASE("analytic sphere inside/outside and bbox padding") {
  const auto f = OccupancyField::build(sphere_spec(1.0));
  CHECK(f.eval(Vec3::Zero()) == 1.0);
  CHECK(f.eval(Vec3(2, 0, 0)) == 0.0);
  CHECK(f.eval(Vec3(0, 0, 1.01)) == 0.0);
  CHECK(f.bbox().lo.x() == doctest::Approx(-1.1));
  CHECK(f.bbox().hi.z() == doctest::Approx(1.1));
  CHECK_THROWS_AS(OccupancyField::build(sphere_spec(std::nan(""))), InputError);
  CHECK_THROWS_AS(OccupancyField::build(sphere_spec(-1.0)), InputError);
}

TEST_CASE("beam, torus and capsule primitives") {
  GeometrySpec beam;
  beam.kind = GeometrySpec::Kind::beam;
  beam.size = Vec3(2.0, 0.5, 0.5);
  const auto b = OccupancyField::build(beam);
  CHECK(b.eval(Vec3(1.0, 0.25, 0.25)) == 1.0);
  CHECK(b.eval(Vec3(2.05, 0.25, 0.25)) == 0.0);

  GeometrySpec torus;
  torus.kind = GeometrySpec::Kind::torus;
  torus.major_radius = 1.0;
  torus.minor_radius = 0.25;
  const auto t = OccupancyField::build(torus);
  CHECK(t.eval(Vec3(1.0, 0.0, 0.0)) == 1.0);
  CHECK(t.eval(Vec3(0.0, 1.2, 0.0)) == 1.0);
  CHECK(t.eval(Vec3::Zero()) == 0.0);
  CHECK(t.eval(Vec3(1.0, 0.0, 0.3)) == 0.0);

  GeometrySpec cap;
  cap.kind = GeometrySpec::Kind::capsule;
  cap.a = Vec3::Zero();
  cap.b = Vec3(1, 0, 0);
  cap.radius = 0.2;
  const auto c = OccupancyField::build(cap);
  CHECK(c.eval(Vec3(0.5, 0.19, 0.0)) == 1.0);
  CHECK(c.eval(Vec3(-0.19, 0.0, 0.0)) == 1.0);
  CHECK(c.eval(Vec3(0.5, 0.21, 0.0)) == 0.0);
}

TEST_CASE("closed-form volumes within three reported standard errors") {
  struct Case {
    GeometrySpec spec;
    double volume;
  };
  std::vector<Case> cases;
  cases.push_back({sphere_spec(1.0, 0.0), 4.0 * M_PI / 3.0});
  GeometrySpec torus;
  torus.kind = GeometrySpec::Kind::torus;
  torus.major_radius = 1.0;
  torus.minor_radius = 0.3;
  cases.push_back({torus, 2.0 * M_PI * M_PI * 1.0 * 0.09});
  GeometrySpec cap;
  cap.kind = GeometrySpec::Kind::capsule;
  cap.a = Vec3::Zero();
  cap.b = Vec3(0, 0, 2);
  cap.radius = 0.5;
  cases.push_back({cap, M_PI * 0.25 * 2.0 + 4.0 / 3.0 * M_PI * 0.125});
  for (const auto& c : cases) {
    const auto f = OccupancyField::build(c.spec);
    const auto v = estimate_volume(f, 1000000, 3);
    CHECK(std::abs(v.volume - c.volume) <= 3.0 * v.std_error);
    CHECK(v.std_error > 0.0);
  }
}

TEST_CASE("cube in its own bbox has exactly the bbox volume") {
  const auto f = OccupancyField::build(unit_cube_spec(0.0));
  const auto v = estimate_volume(f, 1000, 1);
  CHECK(v.volume == 1.0);
  CHECK(v.std_error == 0.0);
  CHECK_THROWS_AS(estimate_volume(f, 99, 1), InputError);
}

TEST_CASE("mesh occupancy on the unit cube and an octahedron") {
  const auto cube = OccupancyField::from_mesh(unit_cube_mesh(), {MaterialRegion{}});
  CHECK(cube.eval(Vec3(0.5, 0.5, 0.5)) == 1.0);
  CHECK(cube.eval(Vec3(1.5, 0.5, 0.5)) == 0.0);

  // Point-in-polytope oracles: box bounds and |x|_1 < 1.
  const auto octa = OccupancyField::from_mesh(octahedron_mesh(), {MaterialRegion{}});
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  int mismatches = 0;
  for (int i = 0; i < 20000; ++i) {
    const Vec3 x(u(rng), u(rng), u(rng));
    const Vec3 y = (x + Vec3::Constant(1.2)) / 2.4 * 1.4 - Vec3::Constant(0.2);
    const bool in_cube = (y.array() > 0.0).all() && (y.array() < 1.0).all();
    mismatches += (cube.eval(y) == 1.0) != in_cube;
    mismatches += (octa.eval(x) == 1.0) != (x.lpNorm<1>() < 1.0);
  }
  CHECK(mismatches == 0);
}

TEST_CASE("mesh ray parity survives rays through shared edges and vertices") {
  const auto cube = OccupancyField::from_mesh(unit_cube_mesh(), {MaterialRegion{}});
  // Rays from these points run exactly along face diagonals and edges.
  CHECK(cube.eval(Vec3(0.5, 0.5, 0.5)) == 1.0);
  CHECK(cube.eval(Vec3(0.25, 0.25, 0.25)) == 1.0);
  CHECK(cube.eval(Vec3(0.75, 0.25, 0.75)) == 1.0);
  const auto octa = OccupancyField::from_mesh(octahedron_mesh(), {MaterialRegion{}});
  CHECK(octa.eval(Vec3::Zero()) == 1.0);
  CHECK(octa.eval(Vec3(0.1, 0.0, 0.0)) == 1.0);
}

TEST_CASE("mesh and point-cloud construction errors") {
  CHECK_THROWS_AS(OccupancyField::from_mesh(TriangleMesh{}, {MaterialRegion{}}), InputError);
  const auto obj = temp_file("quad.obj");
  {
    std::ofstream out(obj);
    out << "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
  }
  CHECK_THROWS_AS(read_obj(obj), InputError);
  CHECK_THROWS_AS(read_obj(temp_file("missing.obj")), InputError);
  CHECK_THROWS_AS(OccupancyField::from_points({}, {MaterialRegion{}}), InputError);
}

TEST_CASE("OBJ and XYZ round trips") {
  const auto mesh = octahedron_mesh();
  const auto path = temp_file("octa.obj");
  write_obj(path, mesh);
  const auto back = read_obj(path);
  CHECK(back.faces == mesh.faces);
  REQUIRE(back.vertices.size() == mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) CHECK(back.vertices[i] == mesh.vertices[i]);

  std::vector<Vec3> pts{{0.1, 0.2, 0.3}, {1.0 / 3.0, -2.5e-7, 12345.678901234567}};
  const auto xyz = temp_file("pts.xyz");
  write_xyz(xyz, pts);
  const auto pts2 = read_xyz(xyz);
  REQUIRE(pts2.size() == 2);
  CHECK(pts2[1] == pts[1]);
}

TEST_CASE("point cloud occupancy is a union of balls") {
  std::vector<Vec3> pts;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j)
      for (int k = 0; k < 11; ++k) pts.emplace_back(0.1 * i, 0.1 * j, 0.1 * k);
  const auto f = OccupancyField::from_points(pts, {MaterialRegion{}});
  // Median nearest-neighbor spacing 0.1, so the ball radius is 0.15.
  CHECK(f.eval(Vec3(0.55, 0.55, 0.55)) == 1.0);
  CHECK(f.eval(Vec3(1.14, 0.5, 0.5)) == 1.0);
  CHECK(f.eval(Vec3(1.16, 0.5, 0.5)) == 0.0);
}

TEST_CASE("density grid: threshold then trilinear interpolation") {
  ScalarGrid g;
  g.dims = {2, 2, 2};
  g.values.assign(8, 0.0f);
  CHECK_THROWS_WITH_AS(OccupancyField::from_grid(g, 0.5, {MaterialRegion{}}),
                       doctest::Contains("empty occupancy"), InputError);
  g.values[g.index(0, 0, 0)] = 0.9f;
  const auto f = OccupancyField::from_grid(g, 0.5, {MaterialRegion{}}, 0.0);
  CHECK(f.eval(Vec3::Zero()) == 1.0);
  // Trilinear weight of corner (0,0,0) at the cell center is 1/8.
  CHECK(f.eval(Vec3::Constant(0.5)) == doctest::Approx(0.125));
  CHECK(f.eval(Vec3(0.25, 0.0, 0.0)) == doctest::Approx(0.75));
  CHECK(f.eval(Vec3::Constant(1.0)) == 0.0);

  const auto path = temp_file("grid.svol");
  write_svol(path, g);
  const auto back = read_svol(path);
  CHECK(back.dims == g.dims);
  CHECK(back.values == g.values);
  CHECK(fs::file_size(path) == 4 + 4 + 12 + 48 + 8 * 4);
  {
    std::fstream io(path, std::ios::in | std::ios::out | std::ios::binary);
    io.write("XVOL", 4);
  }
  CHECK_THROWS_AS(read_svol(path), InputError);
  fs::resize_file(path, 30);
  CHECK_THROWS_AS(read_svol(path), InputError);
}

TEST_CASE("materials: last matching region wins") {
  MaterialRegion base;
  MaterialRegion outer;
  outer.shape = MaterialRegion::Shape::sphere;
  outer.radius = 0.6;
  outer.youngs = 1e6;
  MaterialRegion inner = outer;
  inner.radius = 0.3;
  inner.youngs = 2e6;
  inner.density = 500.0;
  const auto f = OccupancyField::build(sphere_spec(1.0), {base, outer, inner});
  CHECK(f.material(Vec3(0.1, 0, 0)).density == 500.0);
  CHECK(f.material(Vec3(0.1, 0, 0)).mu == doctest::Approx(2e6 / 2.9));
  CHECK(f.material(Vec3(0.5, 0, 0)).mu == doctest::Approx(1e6 / 2.9));
  CHECK(f.material(Vec3(0.9, 0, 0)).mu == doctest::Approx(5e6 / 2.9));
  CHECK_THROWS_WITH(f.material(Vec3(2, 0, 0)), "material undefined outside object");

  MaterialRegion bad;
  bad.poisson = 0.5;
  CHECK_THROWS_AS(OccupancyField::build(sphere_spec(1.0), {bad}), InputError);
  CHECK_THROWS_AS(OccupancyField::build(sphere_spec(1.0), {outer}), InputError);
}

TEST_CASE("sample_interior support, determinism and acceptance rate") {
  const auto cube = OccupancyField::build(unit_cube_spec(0.05));
  const auto pts = sample_interior(cube, 1000, 7);
  REQUIRE(pts.size() == 1000);
  for (const auto& p : pts) {
    CHECK((p.X.array() >= 0.0).all());
    CHECK((p.X.array() <= 1.0).all());
    CHECK(p.occupancy > kOccupancyThreshold);
    CHECK(p.mu == doctest::Approx(5e6 / 2.9));
  }
  const auto again = sample_interior(cube, 1000, 7);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(again[i].X == pts[i].X);
  CHECK(sample_interior(cube, 10, 8)[0].X != pts[0].X);

  const auto sphere = OccupancyField::build(sphere_spec(1.0, 0.0));
  const auto res = sample_interior_with_stats(sphere, 520000, 3);
  const double p = M_PI / 6.0;
  const double n = double(res.proposals);
  const double rate = double(res.points.size()) / n;
  CHECK(std::abs(rate - p) <= 3.0 * std::sqrt(p * (1 - p) / n) + 1.0 / n);
}

TEST_CASE("uniformity of cube samples") {
  const auto cube = OccupancyField::build(unit_cube_spec(0.05));
  const auto pts = sample_interior(cube, 100000, 99);
  Vec3 mean = Vec3::Zero();
  for (const auto& p : pts) mean += p.X;
  mean /= double(pts.size());
  const double se = std::sqrt(1.0 / 12.0 / double(pts.size()));
  for (int k = 0; k < 3; ++k) CHECK(std::abs(mean[k] - 0.5) < 4.0 * se);
}

TEST_CASE("rejection budget exhaustion reports sparse occupancy") {
  struct Half final : OccupancyField::Shape {
    double eval(const Vec3&) const override { return 0.5; }
    Aabb support() const override { return {Vec3::Zero(), Vec3::Ones()}; }
  };
  const auto f = OccupancyField::from_shape(std::make_shared<Half>(), {MaterialRegion{}});
  CHECK_THROWS_WITH_AS(sample_interior(f, 1, 1), doctest::Contains("occupancy too sparse"),
                       NumericalError);
}

} // TEST_SUITE
