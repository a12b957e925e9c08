#pragma once

#include "simplicits/cubature.hpp"
#include "simplicits/elastic.hpp"

#include <array>
#include <optional>
#include <vector>

namespace simplicits {

/// Static obstacle. Signed distance is positive outside.
struct Collider {
  enum class Kind { plane, sphere, box };

  Kind kind = Kind::plane;
  double height = 0.0;             // plane z = height, free side above
  Vec3 center = Vec3::Zero();      // sphere, box
  double radius = 1.0;             // sphere
  Vec3 half_extent = Vec3::Ones(); // box

  /// Signed distance with optional gradient and Hessian.
  double sdf(const Vec3& x, Vec3* grad = nullptr, Mat3* hess = nullptr) const;
  void validate() const;

  friend bool operator==(const Collider&, const Collider&) = default;
};

std::string to_string(Collider::Kind kind);
Collider::Kind collider_kind_from_string(const std::string& name);

struct Keyframe {
  double time = 0.0;
  Vec3 rotation = Vec3::Zero(); // rotation vector (axis * angle), radians
  Vec3 translation = Vec3::Zero();

  friend bool operator==(const Keyframe&, const Keyframe&) = default;
};

/// Piecewise-linear rigid motion of a pin group. The rotation vector and the
/// translation are interpolated linearly between keyframes, then the rotation
/// is rebuilt with Rodrigues' formula about `pivot`. Times outside the keyframe
/// range clamp to the end poses.
struct Script {
  std::vector<Keyframe> keyframes; // strictly increasing times
  Vec3 pivot = Vec3::Zero();

  /// Affine map [R | t] with x' = R (x - pivot) + pivot + translation.
  Mat34 transform(double t) const;
  void validate() const;

  friend bool operator==(const Script&, const Script&) = default;
};

Mat3 rotation_from_vector(const Vec3& v);

/// Cubature points inside `region` at rest are pulled toward target positions
/// by penalty springs on the selected axes.
struct PinGroup {
  enum class Shape { box, sphere };

  Shape shape = Shape::box;
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  std::array<bool, 3> axes{true, true, true};
  std::optional<Script> script;

  bool contains(const Vec3& X) const;
  Vec3 target(const Vec3& X, double time) const;
  void validate() const;

  friend bool operator==(const PinGroup&, const PinGroup&) = default;
};

struct SimConfig {
  double dt = 0.01;
  Vec3 gravity = Vec3(0.0, 0.0, -9.8);
  int newton_max_iters = 10;
  double newton_tol = 1e-6;
  int barrier_iters = 1;
  double kappa0 = 1e3;
  double kappa_growth = 10.0;
  /// Barrier activation distance; default 1e-2 of the bbox diagonal.
  std::optional<double> barrier_dhat;
  /// Pin stiffness; default 1e5 * mean(mu) * V^(1/3).
  std::optional<double> pin_stiffness;
  std::vector<PinGroup> pins;
  std::vector<Collider> colliders;
  EnergyKind energy = EnergyKind::stable_neohookean;
  std::size_t cubature = 2000;
  std::uint64_t seed = 0;
  int frames = 70;

  void validate() const;

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

struct SimState {
  VectorX z;
  VectorX zdot;
  double time = 0.0;
  double kappa = 0.0;

  static SimState rest(int n_handles, double kappa);
};

/// What one step's objective depends on besides z.
struct StepContext {
  VectorX z_tilde;   // z_prev + h zdot_prev
  double time = 0.0; // end-of-step time, used for scripted targets
  double kappa = 0.0;
};

struct Assembly {
  double objective = 0.0;
  VectorX gradient; // empty unless requested
  MatrixX hessian;  // empty unless requested
};

struct EnergyBreakdown {
  double elastic = 0.0;
  double gravity = 0.0;
  double penalty = 0.0;
  double barrier = 0.0;
};

struct NewtonReport {
  int iterations = 0;
  bool converged = false;
  bool stalled = false;
  double gradient_norm = 0.0;
  std::vector<double> objectives; // value at the start and after each accepted step
};

struct StepReport {
  std::vector<NewtonReport> solves; // one per barrier outer iteration
  bool stalled() const;
};

/// Per-point external force model: energy, force gradient f = dE/dx and its
/// Jacobian S for one cubature point at deformed position x.
struct PointLoad {
  double energy = 0.0;
  Vec3 force = Vec3::Zero();
  Mat3 stiffness = Mat3::Zero();
};

/// Backward-Euler stepper in the reduced handle space.
class ReducedSim {
public:
  ReducedSim(CubatureSet cub, SimConfig config, Aabb bbox, Exec exec = Exec::parallel);

  const CubatureSet& cubature() const { return cub_; }
  const SimConfig& config() const { return config_; }
  const MatrixX& mass() const { return M_; }
  double pin_stiffness() const { return pin_k_; }
  double barrier_dhat() const { return dhat_; }
  bool regularized() const { return tikhonov_ > 0.0; }
  /// Cubature indices pinned by each group.
  const std::vector<std::vector<std::size_t>>& pinned() const { return pinned_; }

  std::vector<Vec3> positions(const VectorX& z) const;
  /// Smallest signed distance of any cubature point to any collider (+inf without colliders).
  double min_distance(const VectorX& z) const;
  /// sum_i m_i xdot_i.
  Vec3 linear_momentum(const VectorX& zdot) const;

  PointLoad point_load(std::size_t i, const Vec3& x, const StepContext& ctx, bool derivatives) const;

  /// 1/2 |z - z_tilde|_M^2 + h^2 (E_elastic + E_gravity + E_penalty + E_barrier);
  /// +inf where a barrier distance is non-positive.
  Assembly assemble(const VectorX& z, const StepContext& ctx, bool gradient, bool hessian) const;
  double objective(const VectorX& z, const StepContext& ctx) const {
    return assemble(z, ctx, false, false).objective;
  }
  EnergyBreakdown energies(const VectorX& z, const StepContext& ctx) const;

  NewtonReport newton_solve(VectorX& z, const StepContext& ctx) const;
  /// Barrier outer loop with kappa reset to kappa0, then velocity update.
  StepReport step(SimState& state) const;

  /// Rest state with kappa0; throws InputError when a cubature point starts
  /// inside a collider.
  SimState initial_state() const;

private:
  CubatureSet cub_;
  SimConfig config_;
  Exec exec_;
  MatrixX M_;
  double tikhonov_ = 0.0;
  double pin_k_ = 0.0;
  double dhat_ = 0.0;
  std::vector<std::vector<std::size_t>> pinned_;
  std::vector<int> pin_of_point_; // last matching group, -1 if none
};

/// Barrier b(d) = -(d - dhat)^2 ln(d / dhat) on (0, dhat), 0 beyond, +inf at d <= 0.
double barrier(double d, double dhat);
double barrier_d1(double d, double dhat);
double barrier_d2(double d, double dhat);

} // namespace simplicits
