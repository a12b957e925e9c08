#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace simplicits {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using Mat9 = Eigen::Matrix<double, 9, 9>;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using VectorX = Eigen::VectorXd;
using MatrixX = Eigen::MatrixXd;

/// Bad input: unreadable files, malformed formats, out-of-range parameters.
/// The CLI maps it to exit status 2.
class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure failed (divergence, loss of definiteness, stalls that
/// callers asked to treat as fatal). The CLI maps it to exit status 1.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Axis-aligned box in rest space.
struct Aabb {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  Vec3 extent() const { return hi - lo; }
  Vec3 center() const { return 0.5 * (lo + hi); }
  double volume() const { return extent().prod(); }
  double diagonal() const { return extent().norm(); }
  bool contains(const Vec3& x) const {
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  }
  Aabb padded(double fraction) const {
    const Vec3 pad = fraction * extent();
    return {lo - pad, hi + pad};
  }
};

/// splitmix64 finalizer; used to derive independent stream seeds from
/// (seed, index) pairs so chunked work is reproducible for any thread count.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

} // namespace simplicits
