#pragma once

#include "simplicits/common.hpp"
#include "simplicits/geometry_io.hpp"
#include "simplicits/parallel.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace simplicits {

/// Sampling acceptance threshold on the occupancy value.
inline constexpr double kOccupancyThreshold = 0.5;

struct Lame {
  double lambda = 0.0;
  double mu = 0.0;
};

/// mu = E / (2(1+nu)), lambda = E nu / ((1+nu)(1-2nu)). Requires E > 0, 0 <= nu < 0.5.
Lame lame_from_young_poisson(double youngs, double poisson);

struct MaterialRegion {
  enum class Shape { whole, box, sphere };

  Shape shape = Shape::whole;
  Vec3 lo = Vec3::Zero();     // box
  Vec3 hi = Vec3::Zero();     // box
  Vec3 center = Vec3::Zero(); // sphere
  double radius = 0.0;        // sphere
  double density = 1000.0;    // kg/m^3
  double youngs = 5e6;        // Pa
  double poisson = 0.45;

  bool contains(const Vec3& x) const;
  void validate() const;

  friend bool operator==(const MaterialRegion&, const MaterialRegion&) = default;
};

struct MaterialSample {
  double density = 0.0;
  double lambda = 0.0;
  double mu = 0.0;
};

struct SamplePoint {
  Vec3 X = Vec3::Zero();
  double occupancy = 0.0;
  double density = 0.0;
  double lambda = 0.0;
  double mu = 0.0;
};

/// Describes where an occupancy function comes from. Only the fields relevant
/// to `kind` are read.
struct GeometrySpec {
  enum class Kind { sphere, box, beam, torus, capsule, mesh, points, grid };

  Kind kind = Kind::sphere;
  Vec3 center = Vec3::Zero(); // sphere, torus (axis +z)
  double radius = 1.0;        // sphere, capsule
  Vec3 lo = Vec3::Zero();     // box
  Vec3 hi = Vec3::Ones();     // box
  Vec3 size = Vec3::Ones();   // beam, occupying [0, size]
  double major_radius = 1.0;  // torus
  double minor_radius = 0.25; // torus
  Vec3 a = Vec3::Zero();      // capsule segment
  Vec3 b = Vec3::UnitX();
  std::filesystem::path file; // mesh, points, grid
  double threshold = 0.5;     // grid
  double padding = 0.05;      // bbox padding per side, fraction of extent

  friend bool operator==(const GeometrySpec&, const GeometrySpec&) = default;
};

std::string to_string(GeometrySpec::Kind kind);
GeometrySpec::Kind geometry_kind_from_string(const std::string& name);

/// Inside/outside function with spatially varying materials. Immutable and
/// safe to evaluate from many threads.
class OccupancyField {
public:
  class Shape {
  public:
    virtual ~Shape() = default;
    virtual double eval(const Vec3& x) const = 0;
    /// Box enclosing every point with nonzero occupancy.
    virtual Aabb support() const = 0;
  };

  static OccupancyField build(const GeometrySpec& spec,
                              std::vector<MaterialRegion> materials = {MaterialRegion{}});
  static OccupancyField from_mesh(TriangleMesh mesh, std::vector<MaterialRegion> materials,
                                  double padding = 0.05);
  static OccupancyField from_points(std::vector<Vec3> points,
                                    std::vector<MaterialRegion> materials,
                                    double padding = 0.05);
  static OccupancyField from_grid(ScalarGrid grid, double threshold,
                                  std::vector<MaterialRegion> materials, double padding = 0.05);
  static OccupancyField from_shape(std::shared_ptr<const Shape> shape,
                                   std::vector<MaterialRegion> materials, double padding = 0.05);

  /// Occupancy in [0, 1]; exactly 0 outside bbox().
  double eval(const Vec3& x) const;
  /// Last matching region wins. Throws InputError where eval(x) == 0.
  MaterialSample material(const Vec3& x) const;

  const Aabb& bbox() const { return bbox_; }
  const std::vector<MaterialRegion>& materials() const { return materials_; }

private:
  OccupancyField(std::shared_ptr<const Shape> shape, Aabb bbox,
                 std::vector<MaterialRegion> materials);

  std::shared_ptr<const Shape> shape_;
  Aabb bbox_;
  std::vector<MaterialRegion> materials_;
};

struct SampleResult {
  std::vector<SamplePoint> points;
  std::uint64_t proposals = 0;
};

/// Uniform rejection sampling of {x : eval(x) > threshold} inside bbox.
/// Throws NumericalError("occupancy too sparse") after 1e6 * count proposals.
SampleResult sample_interior_with_stats(const OccupancyField& field, std::size_t count,
                                        std::uint64_t seed, Exec exec = Exec::parallel);
std::vector<SamplePoint> sample_interior(const OccupancyField& field, std::size_t count,
                                         std::uint64_t seed, Exec exec = Exec::parallel);

struct VolumeEstimate {
  double volume = 0.0;
  double std_error = 0.0;
};

/// bbox volume times the accepted fraction of n_samples uniform proposals.
VolumeEstimate estimate_volume(const OccupancyField& field, std::size_t n_samples,
                               std::uint64_t seed, Exec exec = Exec::parallel);

} // namespace simplicits
