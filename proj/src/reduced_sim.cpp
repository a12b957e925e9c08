#include "simplicits/reduced_sim.hpp"

#include "simplicits/linalg.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>

namespace simplicits {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 40;

void require(bool ok, const std::string& message) {
  if (!ok) throw InputError(message);
}

double sign(double v) { return v < 0.0 ? -1.0 : 1.0; }

// The six (r, r') blocks with r <= r' of a symmetric 3 x 3 arrangement.
constexpr std::array<std::pair<int, int>, 6> kBlockPairs{
    {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}}};

struct ChunkSums {
  double energy = 0.0;
  MatrixX grad;                  // 3 x 4n
  std::array<MatrixX, 6> blocks; // 4n x 4n each, ordered as kBlockPairs
};

} // namespace

double barrier(double d, double dhat) {
  if (d <= 0.0) return kInf;
  if (d >= dhat) return 0.0;
  const double e = d - dhat;
  return -e * e * std::log(d / dhat);
}

double barrier_d1(double d, double dhat) {
  if (d >= dhat) return 0.0;
  const double e = d - dhat;
  return -2.0 * e * std::log(d / dhat) - e * e / d;
}

double barrier_d2(double d, double dhat) {
  if (d >= dhat) return 0.0;
  const double e = d - dhat;
  return -2.0 * std::log(d / dhat) - 4.0 * e / d + e * e / (d * d);
}

double Collider::sdf(const Vec3& x, Vec3* grad, Mat3* hess) const {
  switch (kind) {
  case Kind::plane:
    if (grad) *grad = Vec3::UnitZ();
    if (hess) hess->setZero();
    return x.z() - height;
  case Kind::sphere: {
    const Vec3 r = x - center;
    const double len = r.norm();
    const Vec3 u = len > 0.0 ? Vec3(r / len) : Vec3::UnitZ();
    if (grad) *grad = u;
    if (hess) *hess = len > 0.0 ? Mat3((Mat3::Identity() - u * u.transpose()) / len) : Mat3::Zero();
    return len - radius;
  }
  case Kind::box: {
    const Vec3 p = x - center;
    const Vec3 q = p.cwiseAbs() - half_extent;
    if ((q.array() > 0.0).any()) {
      const Vec3 o = q.cwiseMax(0.0);
      const double d = o.norm();
      Vec3 g;
      for (int k = 0; k < 3; ++k) g[k] = sign(p[k]) * o[k] / d;
      if (grad) *grad = g;
      if (hess) {
        Mat3 active = Mat3::Zero();
        for (int k = 0; k < 3; ++k) active(k, k) = q[k] > 0.0 ? 1.0 : 0.0;
        *hess = (active - g * g.transpose()) / d;
      }
      return d;
    }
    int k = 0;
    q.maxCoeff(&k);
    if (grad) *grad = sign(p[k]) * Vec3::Unit(k);
    if (hess) hess->setZero();
    return q[k];
  }
  }
  return kInf;
}

void Collider::validate() const {
  switch (kind) {
  case Kind::plane: require(std::isfinite(height), "plane collider height must be finite"); break;
  case Kind::sphere:
    require(center.allFinite() && std::isfinite(radius) && radius > 0.0,
            "sphere collider needs a finite center and radius > 0");
    break;
  case Kind::box:
    require(center.allFinite() && half_extent.allFinite() && (half_extent.array() > 0.0).all(),
            "box collider needs a finite center and positive half extents");
    break;
  }
}

std::string to_string(Collider::Kind kind) {
  switch (kind) {
  case Collider::Kind::plane: return "plane";
  case Collider::Kind::sphere: return "sphere";
  case Collider::Kind::box: return "box";
  }
  return "?";
}

Collider::Kind collider_kind_from_string(const std::string& name) {
  for (auto k : {Collider::Kind::plane, Collider::Kind::sphere, Collider::Kind::box}) {
    if (to_string(k) == name) return k;
  }
  throw InputError("unknown collider kind '" + name + "'");
}

Mat3 rotation_from_vector(const Vec3& v) {
  const double angle = v.norm();
  if (angle == 0.0) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, v / angle).toRotationMatrix();
}

Mat34 Script::transform(double t) const {
  Vec3 rv = Vec3::Zero();
  Vec3 tr = Vec3::Zero();
  if (!keyframes.empty()) {
    if (t <= keyframes.front().time) {
      rv = keyframes.front().rotation;
      tr = keyframes.front().translation;
    } else if (t >= keyframes.back().time) {
      rv = keyframes.back().rotation;
      tr = keyframes.back().translation;
    } else {
      std::size_t k = 1;
      while (keyframes[k].time < t) ++k;
      const Keyframe& a = keyframes[k - 1];
      const Keyframe& b = keyframes[k];
      const double s = (t - a.time) / (b.time - a.time);
      rv = (1.0 - s) * a.rotation + s * b.rotation;
      tr = (1.0 - s) * a.translation + s * b.translation;
    }
  }
  const Mat3 R = rotation_from_vector(rv);
  Mat34 T;
  T.leftCols<3>() = R;
  T.col(3) = pivot - R * pivot + tr;
  return T;
}

void Script::validate() const {
  require(pivot.allFinite(), "script pivot must be finite");
  for (std::size_t k = 0; k < keyframes.size(); ++k) {
    const auto& f = keyframes[k];
    require(std::isfinite(f.time) && f.rotation.allFinite() && f.translation.allFinite(),
            "script keyframes must be finite");
    if (k > 0) require(f.time > keyframes[k - 1].time, "script keyframe times must increase");
  }
}

bool PinGroup::contains(const Vec3& X) const {
  if (shape == Shape::sphere) return (X - center).norm() <= radius;
  return (X.array() >= lo.array()).all() && (X.array() <= hi.array()).all();
}

Vec3 PinGroup::target(const Vec3& X, double time) const {
  if (!script) return X;
  const Mat34 T = script->transform(time);
  return T.leftCols<3>() * X + T.col(3);
}

void PinGroup::validate() const {
  if (shape == Shape::sphere) {
    require(center.allFinite() && std::isfinite(radius) && radius > 0.0,
            "sphere pin region needs a finite center and radius > 0");
  } else {
    require(lo.allFinite() && hi.allFinite() && (lo.array() <= hi.array()).all(),
            "box pin region needs finite lo <= hi");
  }
  require(axes[0] || axes[1] || axes[2], "pin group must constrain at least one axis");
  if (script) script->validate();
}

void SimConfig::validate() const {
  require(std::isfinite(dt) && dt > 0.0, "sim.dt must be > 0");
  require(gravity.allFinite(), "sim.gravity must be finite");
  require(newton_max_iters >= 1, "sim.newton_iters must be >= 1");
  require(std::isfinite(newton_tol) && newton_tol > 0.0, "sim.newton_tol must be > 0");
  require(barrier_iters >= 1, "sim.barrier_iters must be >= 1");
  require(std::isfinite(kappa0) && kappa0 > 0.0, "sim.kappa0 must be > 0");
  require(std::isfinite(kappa_growth) && kappa_growth >= 1.0, "sim.kappa_growth must be >= 1");
  require(!barrier_dhat || (std::isfinite(*barrier_dhat) && *barrier_dhat > 0.0),
          "sim.dhat must be > 0");
  require(!pin_stiffness || (std::isfinite(*pin_stiffness) && *pin_stiffness > 0.0),
          "sim.pin_stiffness must be > 0");
  require(cubature >= 1, "sim.cubature must be >= 1");
  require(frames >= 0, "sim.frames must be >= 0");
  for (const auto& p : pins) p.validate();
  for (const auto& c : colliders) c.validate();
}

SimState SimState::rest(int n_handles, double kappa) {
  return {VectorX::Zero(12 * n_handles), VectorX::Zero(12 * n_handles), 0.0, kappa};
}

bool StepReport::stalled() const {
  return std::any_of(solves.begin(), solves.end(), [](const NewtonReport& r) { return r.stalled; });
}

ReducedSim::ReducedSim(CubatureSet cub, SimConfig config, Aabb bbox, Exec exec)
    : cub_(std::move(cub)), config_(std::move(config)), exec_(exec) {
  config_.validate();
  require(cub_.size() > 0, "simulation needs cubature points");
  M_ = build_mass_matrix(cub_, exec_);

  const linalg::SymEig eig = linalg::sym_eig(M_);
  const double top = eig.values.cwiseAbs().maxCoeff();
  if (!(eig.values.minCoeff() > 1e-12 * top)) {
    const double trace = M_.trace();
    tikhonov_ = trace > 0.0 ? 1e-8 * trace : 1e-8;
    M_.diagonal().array() += tikhonov_;
  }

  dhat_ = config_.barrier_dhat.value_or(1e-2 * bbox.diagonal());
  double mean_mu = 0.0;
  for (double m : cub_.mu) mean_mu += m;
  mean_mu /= double(cub_.size());
  pin_k_ = config_.pin_stiffness.value_or(1e5 * mean_mu * std::cbrt(cub_.volume));

  pinned_.assign(config_.pins.size(), {});
  pin_of_point_.assign(cub_.size(), -1);
  for (std::size_t i = 0; i < cub_.size(); ++i) {
    for (std::size_t g = 0; g < config_.pins.size(); ++g) {
      if (config_.pins[g].contains(cub_.X[i])) pin_of_point_[i] = int(g);
    }
    if (pin_of_point_[i] >= 0) pinned_[std::size_t(pin_of_point_[i])].push_back(i);
  }
}

std::vector<Vec3> ReducedSim::positions(const VectorX& z) const {
  const MatrixX Zbar = handle_rows(z, cub_.n_handles);
  std::vector<Vec3> x(cub_.size());
  for_each_index(exec_, chunk_count(cub_.size()), [&](std::size_t c) {
    const std::size_t end = std::min(cub_.size(), (c + 1) * kPointChunk);
    for (std::size_t i = c * kPointChunk; i < end; ++i) {
      x[i] = cub_.X[i] + Zbar * cub_.b.row(Eigen::Index(i)).transpose();
    }
  });
  return x;
}

double ReducedSim::min_distance(const VectorX& z) const {
  double best = kInf;
  if (config_.colliders.empty()) return best;
  for (const Vec3& x : positions(z))
    for (const auto& c : config_.colliders) best = std::min(best, c.sdf(x));
  return best;
}

Vec3 ReducedSim::linear_momentum(const VectorX& zdot) const {
  const Eigen::Map<const VectorX> m(cub_.mass.data(), Eigen::Index(cub_.size()));
  const VectorX weighted = cub_.b.transpose() * m;
  return handle_rows(zdot, cub_.n_handles) * weighted;
}

PointLoad ReducedSim::point_load(std::size_t i, const Vec3& x, const StepContext& ctx,
                                 bool derivatives) const {
  PointLoad load;
  const double m = cub_.mass[i];
  load.energy = -m * config_.gravity.dot(x);
  load.force = -m * config_.gravity;

  if (const int g = pin_of_point_[i]; g >= 0) {
    const PinGroup& pin = config_.pins[std::size_t(g)];
    const Vec3 target = pin.target(cub_.X[i], ctx.time);
    for (int r = 0; r < 3; ++r) {
      if (!pin.axes[std::size_t(r)]) continue;
      const double e = x[r] - target[r];
      load.energy += 0.5 * pin_k_ * e * e;
      load.force[r] += pin_k_ * e;
      load.stiffness(r, r) += pin_k_;
    }
  }

  for (const auto& c : config_.colliders) {
    Vec3 grad;
    Mat3 hess;
    const double d = c.sdf(x, &grad, derivatives ? &hess : nullptr);
    if (d <= 0.0) {
      load.energy = kInf;
      return load;
    }
    if (d >= dhat_) continue;
    load.energy += ctx.kappa * barrier(d, dhat_);
    if (!derivatives) continue;
    const double d1 = barrier_d1(d, dhat_);
    load.force += ctx.kappa * d1 * grad;
    load.stiffness += ctx.kappa * (barrier_d2(d, dhat_) * grad * grad.transpose() + d1 * hess);
  }
  return load;
}

Assembly ReducedSim::assemble(const VectorX& z, const StepContext& ctx, bool gradient,
                              bool hessian) const {
  const int n = cub_.n_handles;
  const int q4 = 4 * n;
  const std::size_t p = cub_.size();
  require(z.size() == cub_.dofs() && ctx.z_tilde.size() == cub_.dofs(),
          "state vector length must be 12 n");
  const bool derivs = gradient || hessian;
  const MatrixX Zbar = handle_rows(z, n);
  const double weight = cub_.volume / double(p);
  const EnergyKind kind = config_.energy;

  const std::size_t chunks = chunk_count(p);
  std::vector<ChunkSums> partial(chunks);
  for_each_index(exec_, chunks, [&](std::size_t c) {
    ChunkSums& out = partial[c];
    const std::size_t begin = c * kPointChunk;
    const std::size_t end = std::min(p, begin + kPointChunk);
    const auto len = Eigen::Index(end - begin);
    if (gradient) out.grad = MatrixX::Zero(3, q4);
    MatrixX right;
    std::array<MatrixX, 6> left;
    if (hessian) {
      right.resize(q4, 4 * len);
      for (auto& l : left) l.resize(q4, 4 * len);
    }
    for (std::size_t i = begin; i < end; ++i) {
      const auto row = Eigen::Index(i);
      const auto col = 4 * Eigen::Index(i - begin);
      const MatrixX& G = cub_.G[i];
      const auto bi = cub_.b.row(row).transpose();
      const Mat3 F = Mat3::Identity() + Zbar * G;
      const Vec3 x = cub_.X[i] + Zbar * bi;
      const double ci = weight * cub_.occupancy[i];
      const PointLoad load = point_load(i, x, ctx, derivs);
      out.energy += ci * psi(kind, F, cub_.lambda[i], cub_.mu[i]) + load.energy;
      if (!std::isfinite(load.energy)) return;
      if (gradient) {
        const Mat3 P = psi_gradient(kind, F, cub_.lambda[i], cub_.mu[i]);
        out.grad.noalias() += ci * P * G.transpose();
        out.grad.noalias() += load.force * bi.transpose();
      }
      if (hessian) {
        const Mat9 H = psi_hessian(kind, F, cub_.lambda[i], cub_.mu[i]);
        right.middleCols(col, 3) = G;
        right.col(col + 3) = bi;
        for (std::size_t k = 0; k < kBlockPairs.size(); ++k) {
          const auto [r, r2] = kBlockPairs[k];
          Mat3 Hrr;
          for (int a = 0; a < 3; ++a)
            for (int a2 = 0; a2 < 3; ++a2) Hrr(a, a2) = H(3 * a + r, 3 * a2 + r2);
          left[k].middleCols(col, 3).noalias() = ci * G * Hrr;
          left[k].col(col + 3) = load.stiffness(r, r2) * bi;
        }
      }
    }
    if (hessian) {
      for (std::size_t k = 0; k < kBlockPairs.size(); ++k) {
        out.blocks[k].noalias() = left[k] * right.transpose();
      }
    }
  });

  Assembly result;
  const VectorX d = z - ctx.z_tilde;
  const VectorX Md = M_ * d;
  double potential = 0.0;
  {
    std::vector<double> energies(chunks);
    for (std::size_t c = 0; c < chunks; ++c) energies[c] = partial[c].energy;
    potential = tree_sum(std::move(energies));
  }
  const double h2 = config_.dt * config_.dt;
  result.objective = 0.5 * d.dot(Md) + h2 * potential;
  if (!std::isfinite(result.objective)) {
    result.objective = kInf;
    return result;
  }

  if (gradient) {
    std::vector<MatrixX> parts(chunks);
    for (std::size_t c = 0; c < chunks; ++c) parts[c] = std::move(partial[c].grad);
    const MatrixX g = tree_sum(std::move(parts));
    result.gradient = Md;
    for (int r = 0; r < 3; ++r)
      for (int q = 0; q < q4; ++q) result.gradient(z_index(r, q)) += h2 * g(r, q);
  }
  if (hessian) {
    result.hessian = M_;
    for (std::size_t k = 0; k < kBlockPairs.size(); ++k) {
      std::vector<MatrixX> parts(chunks);
      for (std::size_t c = 0; c < chunks; ++c) parts[c] = std::move(partial[c].blocks[k]);
      MatrixX block = tree_sum(std::move(parts));
      const auto [r, r2] = kBlockPairs[k];
      if (r == r2) block = 0.5 * (block + block.transpose()).eval();
      for (int q = 0; q < q4; ++q)
        for (int q2 = 0; q2 < q4; ++q2) {
          const double v = h2 * block(q, q2);
          result.hessian(z_index(r, q), z_index(r2, q2)) += v;
          if (r != r2) result.hessian(z_index(r2, q2), z_index(r, q)) += v;
        }
    }
  }
  return result;
}

EnergyBreakdown ReducedSim::energies(const VectorX& z, const StepContext& ctx) const {
  const MatrixX Zbar = handle_rows(z, cub_.n_handles);
  const double weight = cub_.volume / double(cub_.size());
  EnergyBreakdown e;
  for (std::size_t i = 0; i < cub_.size(); ++i) {
    const Mat3 F = Mat3::Identity() + Zbar * cub_.G[i];
    const Vec3 x = cub_.X[i] + Zbar * cub_.b.row(Eigen::Index(i)).transpose();
    e.elastic += weight * cub_.occupancy[i] * psi(config_.energy, F, cub_.lambda[i], cub_.mu[i]);
    e.gravity -= cub_.mass[i] * config_.gravity.dot(x);
    if (const int g = pin_of_point_[i]; g >= 0) {
      const PinGroup& pin = config_.pins[std::size_t(g)];
      const Vec3 target = pin.target(cub_.X[i], ctx.time);
      for (int r = 0; r < 3; ++r) {
        if (pin.axes[std::size_t(r)]) e.penalty += 0.5 * pin_k_ * std::pow(x[r] - target[r], 2);
      }
    }
    for (const auto& c : config_.colliders) e.barrier += ctx.kappa * barrier(c.sdf(x), dhat_);
  }
  return e;
}

NewtonReport ReducedSim::newton_solve(VectorX& z, const StepContext& ctx) const {
  NewtonReport report;
  Assembly a = assemble(z, ctx, true, true);
  if (!std::isfinite(a.objective)) {
    throw NumericalError("newton_solve: infeasible starting state (a point is inside a collider)");
  }
  report.objectives.push_back(a.objective);
  const double threshold = config_.newton_tol * std::max(1.0, (M_ * ctx.z_tilde).norm());
  const double dofs = double(cub_.dofs());

  for (int it = 0; it < config_.newton_max_iters; ++it) {
    if (a.gradient.norm() <= threshold) break;
    const double trace = std::abs(a.hessian.trace());
    const double floor = trace > 0.0 ? 1e-8 * trace / dofs : 1e-8;
    const MatrixX Hp = linalg::spd_project(a.hessian, floor);
    const auto L = linalg::try_cholesky(Hp);
    if (!L) throw linalg::NotPositiveDefinite();
    const VectorX dz = -linalg::cholesky_substitute(*L, a.gradient);
    const double slope = a.gradient.dot(dz);

    double s = 1.0;
    bool accepted = false;
    VectorX trial;
    for (int k = 0; k <= kMaxHalvings; ++k, s *= 0.5) {
      trial = z + s * dz;
      const double f = objective(trial, ctx);
      if (std::isfinite(f) && f <= a.objective + kArmijo * s * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      report.stalled = true;
      break;
    }
    z = std::move(trial);
    ++report.iterations;
    a = assemble(z, ctx, true, true);
    report.objectives.push_back(a.objective);
  }
  report.gradient_norm = a.gradient.norm();
  report.converged = report.gradient_norm <= threshold;
  return report;
}

StepReport ReducedSim::step(SimState& state) const {
  const double h = config_.dt;
  StepContext ctx{state.z + h * state.zdot, state.time + h, config_.kappa0};
  VectorX z = std::isfinite(objective(ctx.z_tilde, ctx)) ? ctx.z_tilde : state.z;
  StepReport report;
  for (int outer = 0; outer < config_.barrier_iters; ++outer) {
    report.solves.push_back(newton_solve(z, ctx));
    ctx.kappa *= config_.kappa_growth;
  }
  state.zdot = (z - state.z) / h;
  state.z = std::move(z);
  state.time = ctx.time;
  state.kappa = ctx.kappa;
  return report;
}

SimState ReducedSim::initial_state() const {
  SimState s = SimState::rest(cub_.n_handles, config_.kappa0);
  if (min_distance(s.z) <= 0.0) {
    throw InputError("initial state is infeasible: a cubature point starts inside a collider");
  }
  return s;
}

} // namespace simplicits
