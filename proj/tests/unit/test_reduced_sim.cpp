#include "simplicits/linalg.hpp"
#include "simplicits/reduced_sim.hpp"
#include "simplicits/reference.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace simplicits;

namespace {

const Lame kSoft = lame_from_young_poisson(1e4, 0.3);
const Aabb kUnitBox{Vec3::Zero(), Vec3::Ones()};

std::vector<SamplePoint> box_points(std::size_t count, std::mt19937_64& rng, bool vary = true) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SamplePoint> pts;
  for (std::size_t i = 0; i < count; ++i) {
    SamplePoint s;
    s.X = Vec3(u(rng), u(rng), u(rng));
    s.occupancy = vary ? 0.6 + 0.4 * u(rng) : 1.0;
    s.density = vary ? 800.0 + 400.0 * u(rng) : 1000.0;
    s.lambda = kSoft.lambda * (vary ? 0.5 + u(rng) : 1.0);
    s.mu = kSoft.mu * (vary ? 0.5 + u(rng) : 1.0);
    pts.push_back(s);
  }
  return pts;
}

VectorX random_z(int n, std::mt19937_64& rng, double s) {
  std::normal_distribution<double> d(0.0, s);
  VectorX z(12 * n);
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = d(rng);
  return z;
}

SkinningField constant_one() {
  VectorX c(1);
  c << 1.0;
  return oracle::constant_net(c);
}

SkinningField constant_and_random(std::mt19937_64& rng) {
  return oracle::with_constant_handle(oracle::random_net(2, 2, 6, rng, 0.5));
}

// Pins, a scripted pin, a plane and a sphere within barrier range of some points.
SimConfig busy_config() {
  SimConfig cfg;
  cfg.barrier_dhat = 0.05;
  PinGroup left;
  left.lo = Vec3(-1, -1, -1);
  left.hi = Vec3(0.15, 2, 2);
  left.axes = {true, false, true};
  PinGroup right;
  right.shape = PinGroup::Shape::sphere;
  right.center = Vec3(1, 0.5, 0.5);
  right.radius = 0.2;
  right.script = Script{{{0.0, Vec3::Zero(), Vec3::Zero()}, {1.0, Vec3(0.3, 0, 0), Vec3(0.1, 0, 0)}},
                        Vec3(1, 0.5, 0.5)};
  cfg.pins = {left, right};
  Collider plane;
  plane.height = -0.02;
  Collider ball;
  ball.kind = Collider::Kind::sphere;
  ball.center = Vec3(0.5, 0.5, 1.3);
  ball.radius = 0.27;
  cfg.colliders = {plane, ball};
  return cfg;
}

} // namespace

TEST_SUITE("reduced_sim") {

TEST_CASE("z_index agrees with the handle layout") {
  for (int j = 0; j < 3; ++j)
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 4; ++k) CHECK(z_index(r, 4 * j + k) == HandleTransforms::index(j, r, k));
}

TEST_CASE("cubature basis reproduces the deformation map and its gradient") {
  std::mt19937_64 rng(1);
  const auto net = oracle::random_net(3, 2, 8, rng);
  const auto cub = make_cubature(net, box_points(50, rng), 1.0, Exec::serial);
  CHECK(cub.dofs() == 36);
  const VectorX z = random_z(3, rng, 0.3);
  const HandleTransforms Z(3, z);
  double worst_x = 0.0, worst_F = 0.0, worst_B = 0.0, worst_J = 0.0;
  for (std::size_t i = 0; i < cub.size(); ++i) {
    const Vec3 phi = deformation_map(net.forward(cub.X[i]), Z, cub.X[i]);
    worst_x = std::max(worst_x, (cub.position(i, z) - phi).norm());
    worst_B = std::max(worst_B, (cub.basis_block(i) - reference::basis_block(cub, i)).cwiseAbs().maxCoeff());
    const Mat3 Ffd = deformation_gradient_fd(net, Z, cub.X[i], default_fd_step(net));
    worst_F = std::max(worst_F, (cub.deformation_gradient(i, z) - Ffd).cwiseAbs().maxCoeff());
    const Vec9 fromJ = vec(Mat3::Identity()) + reference::jacobian_block(cub, i) * z;
    worst_J = std::max(worst_J, (fromJ - vec(cub.deformation_gradient(i, z))).cwiseAbs().maxCoeff());
  }
  CHECK(worst_x < 1e-13);
  CHECK(worst_B == 0.0);
  // Weight differences versus differences of phi: equal up to O(h^2).
  CHECK(worst_F < 1e-7);
  CHECK(worst_J < 1e-13);
  const MatrixX B = cub.basis();
  CHECK(B.rows() == 150);
  CHECK((B.middleRows(30, 3) - cub.basis_block(10)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mass matrix matches the explicit sum and is symmetric positive semidefinite") {
  std::mt19937_64 rng(2);
  const auto net = oracle::random_net(2, 2, 6, rng);
  const auto cub = make_cubature(net, box_points(300, rng), 2.0, Exec::serial);
  const MatrixX M = build_mass_matrix(cub, Exec::serial);
  const MatrixX Mref = reference::mass_matrix(cub);
  CHECK(oracle::rel_error(M, Mref) < 1e-13);
  CHECK((M - M.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(Eigen::SelfAdjointEigenSolver<MatrixX>(M).eigenvalues().minCoeff() > -1e-12 * M.norm());

  // Constant unit weight: the translation block carries the total mass.
  const auto one = make_cubature(constant_one(), box_points(100, rng), 2.0, Exec::serial);
  const MatrixX M1 = build_mass_matrix(one);
  double total = 0.0;
  for (double m : one.mass) total += m;
  for (int r = 0; r < 3; ++r) CHECK(M1(z_index(r, 3), z_index(r, 3)) == doctest::Approx(total));
}

TEST_CASE("cubature count and construction errors") {
  std::mt19937_64 rng(3);
  const auto net = oracle::random_net(2, 1, 4, rng);
  CHECK_THROWS_AS(make_cubature(net, {}, 1.0), InputError);
  CHECK_THROWS_AS(make_cubature(net, box_points(5, rng), 0.0), InputError);
  GeometrySpec g;
  g.kind = GeometrySpec::Kind::box;
  const auto field = OccupancyField::build(g);
  CHECK_THROWS_AS(build_cubature(field, net, 7, 0, 1000), InputError);
  const auto cub = build_cubature(field, net, 8, 0, 1000);
  CHECK(cub.size() == 8);
  CHECK(cub.mass[0] == doctest::Approx(1000.0 * cub.volume / 8.0));
}

TEST_CASE("barrier function values and derivatives") {
  const double dhat = 0.1;
  CHECK(std::isinf(barrier(0.0, dhat)));
  CHECK(std::isinf(barrier(-1.0, dhat)));
  CHECK(barrier(0.1, dhat) == 0.0);
  CHECK(barrier(0.2, dhat) == 0.0);
  CHECK(barrier(0.05, dhat) == doctest::Approx(-0.0025 * std::log(0.5)));
  for (double d : {0.001, 0.02, 0.05, 0.09}) {
    const double h = 1e-7 * d;
    CHECK(barrier_d1(d, dhat) == doctest::Approx((barrier(d + h, dhat) - barrier(d - h, dhat)) / (2 * h)).epsilon(1e-6));
    CHECK(barrier_d2(d, dhat) ==
          doctest::Approx((barrier_d1(d + h, dhat) - barrier_d1(d - h, dhat)) / (2 * h)).epsilon(1e-6));
    CHECK(barrier(d, dhat) > 0.0);
    CHECK(barrier_d1(d, dhat) < 0.0);
  }
  // C2 contact with zero at dhat.
  CHECK(std::abs(barrier_d1(dhat * (1 - 1e-9), dhat)) < 1e-12);
  CHECK(std::abs(barrier_d2(dhat * (1 - 1e-9), dhat)) < 1e-6);
}

TEST_CASE("collider distances and derivatives") {
  Collider plane;
  plane.height = 0.5;
  CHECK(plane.sdf(Vec3(3, 4, 2)) == 1.5);
  Collider ball;
  ball.kind = Collider::Kind::sphere;
  ball.center = Vec3(1, 0, 0);
  ball.radius = 0.5;
  CHECK(ball.sdf(Vec3(1, 0, 2)) == doctest::Approx(1.5));
  CHECK(ball.sdf(Vec3(1, 0, 0.25)) == doctest::Approx(-0.25));
  Collider box;
  box.kind = Collider::Kind::box;
  box.center = Vec3(0, 0, 0);
  box.half_extent = Vec3(1, 2, 3);
  CHECK(box.sdf(Vec3(0, 0, 2)) == doctest::Approx(-1.0));
  CHECK(box.sdf(Vec3(2, 3, 0)) == doctest::Approx(std::sqrt(2.0)));
  CHECK(box.sdf(Vec3(0, 0, 5)) == doctest::Approx(2.0));

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (const Collider& c : {plane, ball, box}) {
    for (int t = 0; t < 30; ++t) {
      const Vec3 x(u(rng), u(rng), u(rng));
      Vec3 g;
      Mat3 H;
      const double d = c.sdf(x, &g, &H);
      if (c.kind == Collider::Kind::box && d < 0.0) continue; // piecewise planar inside
      auto f = [&](const VectorX& y) { return c.sdf(Vec3(y)); };
      auto grad = [&](const VectorX& y) -> VectorX {
        Vec3 gy;
        c.sdf(Vec3(y), &gy);
        return gy;
      };
      CHECK(oracle::rel_error(g, oracle::fd_gradient(f, x, 1e-6), 1.0) < 1e-7);
      CHECK(oracle::rel_error(H, oracle::fd_jacobian(grad, x, 1e-6), 1.0) < 1e-6);
    }
  }
  Collider bad = ball;
  bad.radius = 0.0;
  CHECK_THROWS_AS(bad.validate(), InputError);
  CHECK(collider_kind_from_string("box") == Collider::Kind::box);
  CHECK_THROWS_AS(collider_kind_from_string("cone"), InputError);
}

TEST_CASE("scripted pin targets") {
  Script s;
  s.pivot = Vec3(1, 0, 0);
  s.keyframes = {{0.0, Vec3::Zero(), Vec3::Zero()},
                 {1.0, Vec3(0, 0, M_PI / 2), Vec3(0, 0, 1)},
                 {2.0, Vec3(0, 0, M_PI), Vec3(0, 0, 1)}};
  CHECK_NOTHROW(s.validate());
  // Pivot stays put apart from the translation.
  CHECK((s.transform(0.7).leftCols<3>() * s.pivot + s.transform(0.7).col(3) - s.pivot -
         Vec3(0, 0, 0.7)).norm() < 1e-14);
  PinGroup pin;
  pin.script = s;
  // Quarter turn about z through the pivot, then lifted by 1.
  CHECK((pin.target(Vec3(2, 0, 0), 1.0) - Vec3(1, 1, 1)).norm() < 1e-14);
  // Halfway between keyframes 1 and 2: rotation vector 3 pi / 4.
  const Vec3 mid = pin.target(Vec3(2, 0, 0), 1.5);
  CHECK((mid - Vec3(1 + std::cos(0.75 * M_PI), std::sin(0.75 * M_PI), 1)).norm() < 1e-14);
  // Clamped outside the keyframe range.
  CHECK((pin.target(Vec3(2, 0, 0), -1.0) - Vec3(2, 0, 0)).norm() < 1e-14);
  CHECK((pin.target(Vec3(2, 0, 0), 9.0) - pin.target(Vec3(2, 0, 0), 2.0)).norm() == 0.0);
  CHECK((PinGroup{}.target(Vec3(1, 2, 3), 5.0) - Vec3(1, 2, 3)).norm() == 0.0);

  CHECK((rotation_from_vector(Vec3(0, 0, M_PI / 2)) * Vec3::UnitX() - Vec3::UnitY()).norm() < 1e-15);
  s.keyframes[2].time = 1.0;
  CHECK_THROWS_AS(s.validate(), InputError);
  PinGroup none;
  none.axes = {false, false, false};
  CHECK_THROWS_AS(none.validate(), InputError);
}

TEST_CASE("gradient and Hessian of the step objective match finite differences") {
  std::mt19937_64 rng(5);
  const auto net = oracle::random_net(2, 2, 6, rng, 0.3);
  auto pts = box_points(60, rng);
  pts[0].X = Vec3(0.5, 0.5, 0.01);  // near the plane
  pts[1].X = Vec3(0.5, 0.52, 0.99); // near the ball
  const auto cub = make_cubature(net, pts, 1.0, Exec::serial);
  for (auto kind : {EnergyKind::linear, EnergyKind::neohookean, EnergyKind::stable_neohookean}) {
    auto cfg = busy_config();
    cfg.energy = kind;
    const ReducedSim sim(cub, cfg, kUnitBox, Exec::serial);
    const VectorX z = random_z(2, rng, 2e-3);
    const StepContext ctx{random_z(2, rng, 2e-3), 0.4, 1e3};
    REQUIRE(sim.min_distance(z) > 0.0);
    REQUIRE(sim.min_distance(z) < 0.05);
    const auto a = sim.assemble(z, ctx, true, true);
    auto f = [&](const VectorX& y) { return sim.objective(y, ctx); };
    auto g = [&](const VectorX& y) -> VectorX { return sim.assemble(y, ctx, true, false).gradient; };
    CHECK(oracle::rel_error(a.gradient, oracle::fd_gradient(f, z, 1e-6)) < 1e-6);
    CHECK(oracle::rel_error(a.hessian, oracle::fd_jacobian(g, z, 1e-6)) < 1e-6);
    CHECK((a.hessian - a.hessian.transpose()).cwiseAbs().maxCoeff() == 0.0);

    const auto e = sim.energies(z, ctx);
    CHECK(e.barrier > 0.0);
    CHECK(e.penalty > 0.0);
    const VectorX d = z - ctx.z_tilde;
    const double h2 = cfg.dt * cfg.dt;
    CHECK(a.objective == doctest::Approx(0.5 * d.dot(sim.mass() * d) +
                                         h2 * (e.elastic + e.gravity + e.penalty + e.barrier))
                             .epsilon(1e-12));
  }
}

TEST_CASE("chunked assembly matches the explicit reference") {
  std::mt19937_64 rng(6);
  const auto net = oracle::random_net(3, 2, 8, rng, 0.3);
  // More than one chunk so the reduction order is exercised.
  const auto cub = make_cubature(net, box_points(700, rng), 1.0, Exec::serial);
  const ReducedSim sim(cub, busy_config(), kUnitBox, Exec::serial);
  const VectorX z = random_z(3, rng, 1e-3);
  const StepContext ctx{random_z(3, rng, 1e-3), 0.25, 1e3};
  REQUIRE(sim.min_distance(z) > 0.0);
  const auto a = sim.assemble(z, ctx, true, true);
  const auto r = reference::assemble(sim, z, ctx);
  CHECK(a.objective == doctest::Approx(r.objective).epsilon(1e-12));
  CHECK(oracle::rel_error(a.gradient, r.gradient) < 1e-11);
  CHECK(oracle::rel_error(a.hessian, r.hessian) < 1e-11);

  // Objective only, gradient only.
  CHECK(sim.assemble(z, ctx, false, false).gradient.size() == 0);
  CHECK(sim.assemble(z, ctx, true, false).hessian.size() == 0);
}

TEST_CASE("infeasible states evaluate to infinity") {
  std::mt19937_64 rng(7);
  const auto cub = make_cubature(constant_one(), box_points(40, rng), 1.0);
  auto cfg = busy_config();
  const ReducedSim sim(cub, cfg, kUnitBox);
  VectorX z = VectorX::Zero(12);
  z(z_index(2, 3)) = -0.5; // drop everything through the plane
  const StepContext ctx{VectorX::Zero(12), 0.0, 1e3};
  CHECK(std::isinf(sim.objective(z, ctx)));
  CHECK(sim.min_distance(z) < 0.0);

  cfg.colliders[0].height = 0.5;
  const ReducedSim inside(cub, cfg, kUnitBox);
  CHECK_THROWS_AS(inside.initial_state(), InputError);
  CHECK_THROWS_AS(inside.newton_solve(z, ctx), NumericalError);
}

TEST_CASE("derived defaults and pinned sets") {
  std::mt19937_64 rng(8);
  const auto pts = box_points(200, rng);
  const auto cub = make_cubature(constant_and_random(rng), pts, 8.0);
  SimConfig cfg = busy_config();
  cfg.barrier_dhat.reset();
  const ReducedSim sim(cub, cfg, Aabb{Vec3::Zero(), Vec3(1, 2, 2)});
  CHECK(sim.barrier_dhat() == doctest::Approx(0.03));
  double mean_mu = 0.0;
  for (const auto& p : pts) mean_mu += p.mu;
  mean_mu /= double(pts.size());
  CHECK(sim.pin_stiffness() == doctest::Approx(1e5 * mean_mu * 2.0));
  CHECK(!sim.regularized());
  for (std::size_t g = 0; g < 2; ++g) {
    std::vector<std::size_t> expected;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const bool in1 = cfg.pins[1].contains(pts[i].X);
      if (g == 1 ? in1 : (cfg.pins[0].contains(pts[i].X) && !in1)) expected.push_back(i);
    }
    CHECK(sim.pinned()[g] == expected);
    CHECK(!expected.empty());
  }
}

TEST_CASE("singular mass matrix gets a Tikhonov shift") {
  std::mt19937_64 rng(9);
  VectorX c(2);
  c << 1.0, 1.0; // two identical handles
  const auto cub = make_cubature(oracle::constant_net(c), box_points(50, rng), 1.0);
  const ReducedSim sim(cub, SimConfig{}, kUnitBox);
  CHECK(sim.regularized());
  const MatrixX raw = build_mass_matrix(cub);
  const double shift = sim.mass()(0, 0) - raw(0, 0);
  CHECK(shift == doctest::Approx(1e-8 * raw.trace()));
  CHECK(linalg::try_cholesky(sim.mass()).has_value());
}

TEST_CASE("free fall follows the backward Euler recurrence exactly") {
  std::mt19937_64 rng(10);
  const auto cub = make_cubature(constant_one(), box_points(80, rng), 1.0);
  SimConfig cfg;
  cfg.dt = 0.01;
  const ReducedSim sim(cub, cfg, kUnitBox);
  auto state = sim.initial_state();
  const Vec3 g = cfg.gravity;
  for (int k = 1; k <= 20; ++k) {
    const auto rep = sim.step(state);
    REQUIRE(rep.solves.size() == 1);
    CHECK(rep.solves[0].converged);
    CHECK(rep.solves[0].iterations <= 2);
    // v_k = k h g, x_k = h^2 g k (k + 1) / 2.
    const Vec3 expected = cfg.dt * cfg.dt * g * k * (k + 1) / 2.0;
    const Vec3 shift = sim.positions(state.z)[5] - cub.X[5];
    CHECK((shift - expected).norm() < 1e-10 * expected.norm());
    CHECK((sim.positions(state.z)[17] - cub.X[17] - shift).norm() < 1e-12);
  }
  CHECK(state.time == doctest::Approx(0.2));
}

TEST_CASE("rest is an equilibrium without loads") {
  std::mt19937_64 rng(11);
  const auto net = oracle::random_net(2, 2, 6, rng, 0.3);
  SimConfig cfg;
  cfg.gravity = Vec3::Zero();
  const ReducedSim sim(make_cubature(net, box_points(100, rng), 1.0), cfg, kUnitBox);
  auto state = sim.initial_state();
  for (int k = 0; k < 5; ++k) {
    const auto rep = sim.step(state);
    CHECK(rep.solves[0].iterations == 0);
  }
  CHECK(state.z.norm() == 0.0);
}

TEST_CASE("linear momentum is conserved without external forces") {
  std::mt19937_64 rng(12);
  SimConfig cfg;
  cfg.gravity = Vec3::Zero();
  cfg.newton_tol = 1e-12;
  cfg.newton_max_iters = 50;
  const auto net = constant_and_random(rng);
  const ReducedSim sim(make_cubature(net, box_points(200, rng), 1.0), cfg, kUnitBox);
  auto state = sim.initial_state();
  state.zdot = random_z(2, rng, 0.5);
  const Vec3 p0 = sim.linear_momentum(state.zdot);
  REQUIRE(p0.norm() > 0.0);
  for (int k = 0; k < 10; ++k) {
    const auto rep = sim.step(state);
    CHECK(!rep.stalled());
  }
  CHECK((sim.linear_momentum(state.zdot) - p0).norm() < 1e-8 * p0.norm());
}

TEST_CASE("Newton decreases the objective monotonically and keeps points feasible") {
  std::mt19937_64 rng(13);
  const auto net = oracle::random_net(3, 2, 8, rng, 0.3);
  SimConfig cfg = busy_config();
  cfg.newton_max_iters = 30;
  const ReducedSim sim(make_cubature(net, box_points(300, rng), 1.0), cfg, kUnitBox);
  auto state = sim.initial_state();
  for (int k = 0; k < 10; ++k) {
    const auto rep = sim.step(state);
    for (const auto& s : rep.solves) {
      for (std::size_t i = 1; i < s.objectives.size(); ++i) CHECK(s.objectives[i] <= s.objectives[i - 1]);
      CHECK(!s.stalled);
    }
    CHECK(sim.min_distance(state.z) > 0.0);
  }
}

TEST_CASE("a falling block stays above the floor") {
  std::mt19937_64 rng(14);
  auto pts = box_points(150, rng);
  for (auto& p : pts) p.X.z() += 0.05;
  SimConfig cfg;
  Collider floor;
  cfg.colliders = {floor};
  cfg.barrier_dhat = 0.02;
  cfg.barrier_iters = 2;
  cfg.newton_max_iters = 30;
  const ReducedSim sim(make_cubature(constant_and_random(rng), pts, 1.0), cfg, kUnitBox);
  auto state = sim.initial_state();
  double lowest = 1.0;
  for (int k = 0; k < 40; ++k) {
    sim.step(state);
    lowest = std::min(lowest, sim.min_distance(state.z));
    REQUIRE(lowest > 0.0);
  }
  CHECK(lowest < 0.02); // it did reach the contact zone
}

} // TEST_SUITE
