#include "simplicits/occupancy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_map>

namespace simplicits {

namespace {

constexpr std::size_t kProposalChunk = 4096;
constexpr double kRejectionBudget = 1e6;

bool finite(const Vec3& v) { return v.allFinite(); }

void require(bool ok, const std::string& message) {
  if (!ok) throw InputError(message);
}

// ---------------------------------------------------------------- analytic

class SphereShape final : public OccupancyField::Shape {
public:
  SphereShape(Vec3 c, double r) : c_(std::move(c)), r_(r) {}
  double eval(const Vec3& x) const override { return (x - c_).squaredNorm() <= r_ * r_ ? 1.0 : 0.0; }
  Aabb support() const override { return {c_.array() - r_, c_.array() + r_}; }

private:
  Vec3 c_;
  double r_;
};

class BoxShape final : public OccupancyField::Shape {
public:
  BoxShape(Vec3 lo, Vec3 hi) : box_{std::move(lo), std::move(hi)} {}
  double eval(const Vec3& x) const override { return box_.contains(x) ? 1.0 : 0.0; }
  Aabb support() const override { return box_; }

private:
  Aabb box_;
};

// Torus around the +z axis through `c`.
class TorusShape final : public OccupancyField::Shape {
public:
  TorusShape(Vec3 c, double major, double minor) : c_(std::move(c)), R_(major), r_(minor) {}
  double eval(const Vec3& x) const override {
    const Vec3 d = x - c_;
    const double radial = std::hypot(d.x(), d.y()) - R_;
    return radial * radial + d.z() * d.z() <= r_ * r_ ? 1.0 : 0.0;
  }
  Aabb support() const override {
    const Vec3 half(R_ + r_, R_ + r_, r_);
    return {c_ - half, c_ + half};
  }

private:
  Vec3 c_;
  double R_, r_;
};

class CapsuleShape final : public OccupancyField::Shape {
public:
  CapsuleShape(Vec3 a, Vec3 b, double r) : a_(std::move(a)), b_(std::move(b)), r_(r) {}
  double eval(const Vec3& x) const override {
    const Vec3 ab = b_ - a_;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((x - a_).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (x - (a_ + t * ab)).squaredNorm() <= r_ * r_ ? 1.0 : 0.0;
  }
  Aabb support() const override {
    return {a_.cwiseMin(b_).array() - r_, a_.cwiseMax(b_).array() + r_};
  }

private:
  Vec3 a_, b_;
  double r_;
};

// -------------------------------------------------------------------- mesh

// Inside test by ray parity along +x, +y and +z with a majority vote. Shared
// edges and vertices are resolved with a top-left fill rule in the projected
// plane so a ray through them is counted exactly once.
class MeshShape final : public OccupancyField::Shape {
public:
  explicit MeshShape(TriangleMesh mesh) : mesh_(std::move(mesh)) {
    require(!mesh_.faces.empty(), "degenerate mesh: zero triangles");
    for (const Vec3& v : mesh_.vertices) require(finite(v), "mesh has non-finite vertices");
    support_.lo = mesh_.vertices.front();
    support_.hi = mesh_.vertices.front();
    for (const Vec3& v : mesh_.vertices) {
      support_.lo = support_.lo.cwiseMin(v);
      support_.hi = support_.hi.cwiseMax(v);
    }
    for (int axis = 0; axis < 3; ++axis) build_index(axis);
  }

  double eval(const Vec3& x) const override {
    if (!support_.contains(x)) return 0.0;
    int votes = 0;
    for (int axis = 0; axis < 3; ++axis) votes += odd_crossings(x, axis) ? 1 : 0;
    return votes >= 2 ? 1.0 : 0.0;
  }

  Aabb support() const override { return support_; }

private:
  struct AxisIndex {
    int u = 0, v = 0;
    double lo_u = 0, lo_v = 0, cell_u = 1, cell_v = 1;
    int nu = 1, nv = 1;
    std::vector<std::vector<int>> bins;

    int bin_u(double pu) const { return std::clamp(int((pu - lo_u) / cell_u), 0, nu - 1); }
    int bin_v(double pv) const { return std::clamp(int((pv - lo_v) / cell_v), 0, nv - 1); }
  };

  void build_index(int axis) {
    AxisIndex& idx = index_[axis];
    idx.u = (axis + 1) % 3;
    idx.v = (axis + 2) % 3;
    const int res = std::clamp(int(std::ceil(std::sqrt(double(mesh_.faces.size())))), 1, 128);
    idx.nu = idx.nv = res;
    idx.lo_u = support_.lo[idx.u];
    idx.lo_v = support_.lo[idx.v];
    idx.cell_u = std::max((support_.hi[idx.u] - idx.lo_u) / res, 1e-300);
    idx.cell_v = std::max((support_.hi[idx.v] - idx.lo_v) / res, 1e-300);
    idx.bins.assign(std::size_t(res) * res, {});
    for (std::size_t f = 0; f < mesh_.faces.size(); ++f) {
      double umin = std::numeric_limits<double>::infinity(), umax = -umin;
      double vmin = umin, vmax = -umin;
      for (int c : mesh_.faces[f]) {
        const Vec3& p = mesh_.vertices[c];
        umin = std::min(umin, p[idx.u]);
        umax = std::max(umax, p[idx.u]);
        vmin = std::min(vmin, p[idx.v]);
        vmax = std::max(vmax, p[idx.v]);
      }
      for (int bv = idx.bin_v(vmin); bv <= idx.bin_v(vmax); ++bv)
        for (int bu = idx.bin_u(umin); bu <= idx.bin_u(umax); ++bu)
          idx.bins[std::size_t(bv) * res + bu].push_back(int(f));
    }
  }

  static double edge(double au, double av, double bu, double bv, double pu, double pv) {
    return (bu - au) * (pv - av) - (bv - av) * (pu - au);
  }

  // Counter-clockwise triangles own their left edges and horizontal top edges.
  static bool owns(double au, double av, double bu, double bv) {
    const double dv = bv - av;
    return dv < 0.0 || (dv == 0.0 && bu < au);
  }

  bool odd_crossings(const Vec3& x, int axis) const {
    const AxisIndex& idx = index_[axis];
    const double pu = x[idx.u], pv = x[idx.v];
    const auto& bin = idx.bins[std::size_t(idx.bin_v(pv)) * idx.nu + idx.bin_u(pu)];
    int hits = 0;
    for (int f : bin) {
      const auto& face = mesh_.faces[f];
      const Vec3* p0 = &mesh_.vertices[face[0]];
      const Vec3* p1 = &mesh_.vertices[face[1]];
      const Vec3* p2 = &mesh_.vertices[face[2]];
      double area = edge((*p0)[idx.u], (*p0)[idx.v], (*p1)[idx.u], (*p1)[idx.v], (*p2)[idx.u],
                         (*p2)[idx.v]);
      if (area == 0.0) continue; // parallel to the ray
      if (area < 0.0) {
        std::swap(p1, p2);
        area = -area;
      }
      const Vec3* ring[3] = {p0, p1, p2};
      double bary[3];
      bool inside = true;
      for (int e = 0; e < 3 && inside; ++e) {
        const Vec3& a = *ring[e];
        const Vec3& b = *ring[(e + 1) % 3];
        const double w = edge(a[idx.u], a[idx.v], b[idx.u], b[idx.v], pu, pv);
        inside = w > 0.0 || (w == 0.0 && owns(a[idx.u], a[idx.v], b[idx.u], b[idx.v]));
        bary[(e + 2) % 3] = w / area;
      }
      if (!inside) continue;
      const double depth = bary[0] * (*p0)[axis] + bary[1] * (*p1)[axis] + bary[2] * (*p2)[axis];
      if (depth > x[axis]) ++hits;
    }
    return hits % 2 == 1;
  }

  TriangleMesh mesh_;
  Aabb support_;
  std::array<AxisIndex, 3> index_;
};

// ------------------------------------------------------------- point cloud

class CellHash {
public:
  CellHash(const std::vector<Vec3>& points, Vec3 origin, double cell)
      : origin_(std::move(origin)), cell_(cell) {
    for (std::size_t i = 0; i < points.size(); ++i) cells_[key(coord(points[i]))].push_back(int(i));
  }

  Eigen::Vector3i coord(const Vec3& x) const {
    return ((x - origin_) / cell_).array().floor().cast<int>();
  }

  const std::vector<int>* at(const Eigen::Vector3i& c) const {
    auto it = cells_.find(key(c));
    return it == cells_.end() ? nullptr : &it->second;
  }

  double cell() const { return cell_; }

private:
  static std::int64_t key(const Eigen::Vector3i& c) {
    constexpr std::int64_t bias = 1 << 20;
    return ((c.x() + bias) << 42) ^ ((c.y() + bias) << 21) ^ (c.z() + bias);
  }

  Vec3 origin_;
  double cell_;
  std::unordered_map<std::int64_t, std::vector<int>> cells_;
};

// Union of balls of radius 1.5x the median nearest-neighbour spacing.
class PointCloudShape final : public OccupancyField::Shape {
public:
  explicit PointCloudShape(std::vector<Vec3> points) : points_(std::move(points)) {
    require(points_.size() >= 2, "point cloud needs at least 2 points");
    Aabb box{points_.front(), points_.front()};
    for (const Vec3& p : points_) {
      require(finite(p), "point cloud has non-finite coordinates");
      box.lo = box.lo.cwiseMin(p);
      box.hi = box.hi.cwiseMax(p);
    }
    const double extent = box.extent().maxCoeff();
    require(extent > 0.0, "point cloud has zero extent");
    const double probe_cell = extent / std::cbrt(double(points_.size()));
    CellHash probe(points_, box.lo, probe_cell);

    std::vector<double> nn(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) nn[i] = nearest_distance(probe, i);
    auto mid = nn.begin() + nn.size() / 2;
    std::nth_element(nn.begin(), mid, nn.end());
    radius_ = 1.5 * *mid;
    require(radius_ > 0.0, "point cloud spacing is zero (duplicate points)");

    hash_ = std::make_unique<CellHash>(points_, box.lo, radius_);
    support_ = {box.lo.array() - radius_, box.hi.array() + radius_};
  }

  double eval(const Vec3& x) const override {
    const Eigen::Vector3i c = hash_->coord(x);
    const double r2 = radius_ * radius_;
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const auto* cell = hash_->at(c + Eigen::Vector3i(dx, dy, dz));
          if (!cell) continue;
          for (int i : *cell)
            if ((points_[i] - x).squaredNorm() <= r2) return 1.0;
        }
    return 0.0;
  }

  Aabb support() const override { return support_; }
  double radius() const { return radius_; }

private:
  double nearest_distance(const CellHash& hash, std::size_t self) const {
    const Vec3& x = points_[self];
    const Eigen::Vector3i c = hash.coord(x);
    double best = std::numeric_limits<double>::infinity();
    for (int ring = 0;; ++ring) {
      for (int dz = -ring; dz <= ring; ++dz)
        for (int dy = -ring; dy <= ring; ++dy)
          for (int dx = -ring; dx <= ring; ++dx) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
            const auto* cell = hash.at(c + Eigen::Vector3i(dx, dy, dz));
            if (!cell) continue;
            for (int i : *cell)
              if (std::size_t(i) != self) best = std::min(best, (points_[i] - x).norm());
          }
      // Anything in ring k+1 or beyond is at least k * cell away.
      if (best <= ring * hash.cell()) return best;
    }
  }

  std::vector<Vec3> points_;
  double radius_ = 0.0;
  std::unique_ptr<CellHash> hash_;
  Aabb support_;
};

// -------------------------------------------------------------------- grid

// Thresholded 0/1 node indicator, trilinearly interpolated.
class GridShape final : public OccupancyField::Shape {
public:
  GridShape(ScalarGrid grid, double threshold) : grid_(std::move(grid)) {
    for (auto d : grid_.dims) require(d >= 2, "density grid needs at least 2 nodes per axis");
    require(grid_.values.size() == std::size_t(grid_.dims[0]) * grid_.dims[1] * grid_.dims[2],
            "density grid value count does not match its dimensions");
    require(finite(grid_.origin) && finite(grid_.spacing) && (grid_.spacing.array() > 0.0).all(),
            "density grid origin/spacing must be finite with positive spacing");
    require(std::isfinite(threshold), "density threshold must be finite");

    inside_.resize(grid_.values.size());
    bool any = false;
    Eigen::Vector3i lo(grid_.dims[0], grid_.dims[1], grid_.dims[2]), hi(-1, -1, -1);
    for (std::uint32_t k = 0; k < grid_.dims[2]; ++k)
      for (std::uint32_t j = 0; j < grid_.dims[1]; ++j)
        for (std::uint32_t i = 0; i < grid_.dims[0]; ++i) {
          const std::size_t id = grid_.index(i, j, k);
          const bool in = double(grid_.values[id]) > threshold;
          inside_[id] = in ? 1 : 0;
          if (in) {
            any = true;
            lo = lo.cwiseMin(Eigen::Vector3i(i, j, k));
            hi = hi.cwiseMax(Eigen::Vector3i(i, j, k));
          }
        }
    require(any, "empty occupancy: no grid value above threshold");
    const Eigen::Vector3i last(grid_.dims[0] - 1, grid_.dims[1] - 1, grid_.dims[2] - 1);
    lo = (lo.array() - 1).max(0);
    hi = (hi.array() + 1).min(last.array());
    support_ = {grid_.node(lo.x(), lo.y(), lo.z()), grid_.node(hi.x(), hi.y(), hi.z())};
  }

  double eval(const Vec3& x) const override {
    const Vec3 g = (x - grid_.origin).cwiseQuotient(grid_.spacing);
    std::size_t base[3];
    double frac[3];
    for (int a = 0; a < 3; ++a) {
      const double top = double(grid_.dims[a] - 1);
      if (!(g[a] >= 0.0 && g[a] <= top)) return 0.0;
      const double cell = std::min(std::floor(g[a]), top - 1.0);
      base[a] = std::size_t(cell);
      frac[a] = g[a] - cell;
    }
    double value = 0.0;
    for (int corner = 0; corner < 8; ++corner) {
      const int di = corner & 1, dj = (corner >> 1) & 1, dk = (corner >> 2) & 1;
      const double w = (di ? frac[0] : 1.0 - frac[0]) * (dj ? frac[1] : 1.0 - frac[1]) *
                       (dk ? frac[2] : 1.0 - frac[2]);
      if (w == 0.0) continue;
      value += w * inside_[grid_.index(base[0] + di, base[1] + dj, base[2] + dk)];
    }
    return std::clamp(value, 0.0, 1.0);
  }

  Aabb support() const override { return support_; }

private:
  ScalarGrid grid_;
  std::vector<std::uint8_t> inside_;
  Aabb support_;
};

void validate_materials(const std::vector<MaterialRegion>& materials) {
  require(!materials.empty(), "at least one material region is required");
  require(materials.front().shape == MaterialRegion::Shape::whole,
          "material rule 0 must cover the whole object");
  for (const auto& m : materials) m.validate();
}

} // namespace

// ------------------------------------------------------------------- public

Lame lame_from_young_poisson(double youngs, double poisson) {
  require(std::isfinite(youngs) && youngs > 0.0, "Young's modulus must be positive");
  require(std::isfinite(poisson) && poisson >= 0.0 && poisson < 0.5,
          "Poisson ratio must lie in [0, 0.5)");
  return {youngs * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson)),
          youngs / (2.0 * (1.0 + poisson))};
}

bool MaterialRegion::contains(const Vec3& x) const {
  switch (shape) {
  case Shape::whole: return true;
  case Shape::box: return Aabb{lo, hi}.contains(x);
  case Shape::sphere: return (x - center).squaredNorm() <= radius * radius;
  }
  return false;
}

void MaterialRegion::validate() const {
  require(std::isfinite(density) && density > 0.0, "material density must be positive");
  lame_from_young_poisson(youngs, poisson);
  if (shape == Shape::box) require(finite(lo) && finite(hi) && (hi.array() > lo.array()).all(),
                                   "material box needs min < max");
  if (shape == Shape::sphere)
    require(finite(center) && std::isfinite(radius) && radius > 0.0,
            "material sphere needs a positive radius");
}

std::string to_string(GeometrySpec::Kind kind) {
  switch (kind) {
  case GeometrySpec::Kind::sphere: return "sphere";
  case GeometrySpec::Kind::box: return "box";
  case GeometrySpec::Kind::beam: return "beam";
  case GeometrySpec::Kind::torus: return "torus";
  case GeometrySpec::Kind::capsule: return "capsule";
  case GeometrySpec::Kind::mesh: return "mesh";
  case GeometrySpec::Kind::points: return "points";
  case GeometrySpec::Kind::grid: return "grid";
  }
  return "?";
}

GeometrySpec::Kind geometry_kind_from_string(const std::string& name) {
  for (auto k : {GeometrySpec::Kind::sphere, GeometrySpec::Kind::box, GeometrySpec::Kind::beam,
                 GeometrySpec::Kind::torus, GeometrySpec::Kind::capsule, GeometrySpec::Kind::mesh,
                 GeometrySpec::Kind::points, GeometrySpec::Kind::grid}) {
    if (to_string(k) == name) return k;
  }
  throw InputError("unknown geometry type '" + name + "'");
}

OccupancyField::OccupancyField(std::shared_ptr<const Shape> shape, Aabb bbox,
                               std::vector<MaterialRegion> materials)
    : shape_(std::move(shape)), bbox_(std::move(bbox)), materials_(std::move(materials)) {}

OccupancyField OccupancyField::from_shape(std::shared_ptr<const Shape> shape,
                                          std::vector<MaterialRegion> materials, double padding) {
  validate_materials(materials);
  require(std::isfinite(padding) && padding >= 0.0, "bbox padding must be non-negative");
  const Aabb box = shape->support().padded(padding);
  require(finite(box.lo) && finite(box.hi) && (box.extent().array() > 0.0).all(),
          "bounding box must have positive extent on every axis");
  return OccupancyField(std::move(shape), box, std::move(materials));
}

OccupancyField OccupancyField::from_mesh(TriangleMesh mesh, std::vector<MaterialRegion> materials,
                                         double padding) {
  return from_shape(std::make_shared<MeshShape>(std::move(mesh)), std::move(materials), padding);
}

OccupancyField OccupancyField::from_points(std::vector<Vec3> points,
                                           std::vector<MaterialRegion> materials, double padding) {
  return from_shape(std::make_shared<PointCloudShape>(std::move(points)), std::move(materials),
                    padding);
}

OccupancyField OccupancyField::from_grid(ScalarGrid grid, double threshold,
                                         std::vector<MaterialRegion> materials, double padding) {
  return from_shape(std::make_shared<GridShape>(std::move(grid), threshold), std::move(materials),
                    padding);
}

OccupancyField OccupancyField::build(const GeometrySpec& spec,
                                     std::vector<MaterialRegion> materials) {
  using K = GeometrySpec::Kind;
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  switch (spec.kind) {
  case K::sphere:
    require(finite(spec.center) && positive(spec.radius), "sphere needs finite center, radius > 0");
    return from_shape(std::make_shared<SphereShape>(spec.center, spec.radius), std::move(materials),
                      spec.padding);
  case K::box:
    require(finite(spec.lo) && finite(spec.hi) && (spec.hi.array() > spec.lo.array()).all(),
            "box needs finite min < max");
    return from_shape(std::make_shared<BoxShape>(spec.lo, spec.hi), std::move(materials),
                      spec.padding);
  case K::beam:
    require(finite(spec.size) && (spec.size.array() > 0.0).all(), "beam needs positive size");
    return from_shape(std::make_shared<BoxShape>(Vec3::Zero(), spec.size), std::move(materials),
                      spec.padding);
  case K::torus:
    require(finite(spec.center) && positive(spec.major_radius) && positive(spec.minor_radius),
            "torus needs finite center and positive radii");
    return from_shape(
        std::make_shared<TorusShape>(spec.center, spec.major_radius, spec.minor_radius),
        std::move(materials), spec.padding);
  case K::capsule:
    require(finite(spec.a) && finite(spec.b) && positive(spec.radius),
            "capsule needs finite endpoints and radius > 0");
    return from_shape(std::make_shared<CapsuleShape>(spec.a, spec.b, spec.radius),
                      std::move(materials), spec.padding);
  case K::mesh: return from_mesh(read_obj(spec.file), std::move(materials), spec.padding);
  case K::points: return from_points(read_xyz(spec.file), std::move(materials), spec.padding);
  case K::grid:
    return from_grid(read_svol(spec.file), spec.threshold, std::move(materials), spec.padding);
  }
  throw InputError("unhandled geometry kind");
}

double OccupancyField::eval(const Vec3& x) const {
  if (!bbox_.contains(x)) return 0.0;
  return shape_->eval(x);
}

MaterialSample OccupancyField::material(const Vec3& x) const {
  if (!(eval(x) > 0.0)) throw InputError("material undefined outside object");
  const MaterialRegion* rule = &materials_.front();
  for (const auto& m : materials_)
    if (m.contains(x)) rule = &m;
  const Lame lame = lame_from_young_poisson(rule->youngs, rule->poisson);
  return {rule->density, lame.lambda, lame.mu};
}

SampleResult sample_interior_with_stats(const OccupancyField& field, std::size_t count,
                                        std::uint64_t seed, Exec exec) {
  require(count >= 1, "sample count must be at least 1");
  const Aabb& box = field.bbox();
  const double budget = kRejectionBudget * double(count);
  const std::size_t max_round = std::size_t(std::max(1, thread_count())) * 4;

  // Chunks are consumed strictly in index order, so how many are generated per
  // round only affects speed, never the result.
  SampleResult result;
  result.points.reserve(count);
  std::size_t next_chunk = 0;
  std::size_t round = 1;
  double seen = 0.0, hits = 0.0;
  while (result.points.size() < count) {
    if (double(result.proposals) >= budget) {
      throw NumericalError("occupancy too sparse: acceptance rate below 1e-6");
    }
    std::vector<std::vector<SamplePoint>> accepted(round);
    for_each_index(exec, round, [&](std::size_t r) {
      std::mt19937_64 rng(mix_seed(seed, next_chunk + r));
      std::uniform_real_distribution<double> ux(box.lo.x(), box.hi.x());
      std::uniform_real_distribution<double> uy(box.lo.y(), box.hi.y());
      std::uniform_real_distribution<double> uz(box.lo.z(), box.hi.z());
      for (std::size_t i = 0; i < kProposalChunk; ++i) {
        const double x = ux(rng), y = uy(rng), z = uz(rng);
        const Vec3 p(x, y, z);
        const double phi = field.eval(p);
        if (phi > kOccupancyThreshold) {
          const MaterialSample m = field.material(p);
          accepted[r].push_back({p, phi, m.density, m.lambda, m.mu});
        }
      }
    });
    for (std::size_t r = 0; r < round && result.points.size() < count; ++r) {
      result.proposals += kProposalChunk;
      const std::size_t take = std::min(accepted[r].size(), count - result.points.size());
      result.points.insert(result.points.end(), accepted[r].begin(), accepted[r].begin() + take);
    }
    next_chunk += round;
    for (const auto& a : accepted) hits += double(a.size());
    seen += double(round * kProposalChunk);
    const double rate = std::max(hits / seen, 1e-6);
    const double remaining = double(count - result.points.size());
    round = std::clamp<std::size_t>(std::size_t(remaining / rate / double(kProposalChunk)) + 1, 1,
                                    max_round);
  }
  return result;
}

std::vector<SamplePoint> sample_interior(const OccupancyField& field, std::size_t count,
                                         std::uint64_t seed, Exec exec) {
  return sample_interior_with_stats(field, count, seed, exec).points;
}

VolumeEstimate estimate_volume(const OccupancyField& field, std::size_t n_samples,
                               std::uint64_t seed, Exec exec) {
  require(n_samples >= 100, "volume estimate needs at least 100 samples");
  const Aabb& box = field.bbox();
  const std::size_t chunks = chunk_count(n_samples, kProposalChunk);
  std::vector<std::size_t> hits(chunks, 0);
  for_each_index(exec, chunks, [&](std::size_t c) {
    std::mt19937_64 rng(mix_seed(seed, c));
    std::uniform_real_distribution<double> ux(box.lo.x(), box.hi.x());
    std::uniform_real_distribution<double> uy(box.lo.y(), box.hi.y());
    std::uniform_real_distribution<double> uz(box.lo.z(), box.hi.z());
    const std::size_t begin = c * kProposalChunk;
    const std::size_t end = std::min(n_samples, begin + kProposalChunk);
    std::size_t local = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const double x = ux(rng), y = uy(rng), z = uz(rng);
      if (field.eval(Vec3(x, y, z)) > kOccupancyThreshold) ++local;
    }
    hits[c] = local;
  });
  std::size_t accepted = 0;
  for (auto h : hits) accepted += h;
  const double n = double(n_samples);
  const double frac = double(accepted) / n;
  return {box.volume() * frac, box.volume() * std::sqrt(frac * (1.0 - frac) / n)};
}

} // namespace simplicits
