#pragma once

#include "simplicits/common.hpp"
#include "simplicits/parallel.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace simplicits {

/// ELU with alpha = 1.
inline double elu(double u) { return u >= 0.0 ? u : std::expm1(u); }
inline double elu_derivative(double u) { return u >= 0.0 ? 1.0 : std::exp(u); }

/// Neural skinning-weight field W: R^3 -> R^n.
///
/// `depth` hidden ELU layers of `width` units followed by a linear output
/// layer. Inputs are normalized as (x - input_center) / input_scale before the
/// first layer. Parameters are laid out layer by layer: a row-major
/// (out x in) weight block followed by the `out` biases.
class SkinningField {
public:
  SkinningField(int n_handles, int depth, int width, Vec3 input_center = Vec3::Zero(),
                double input_scale = 1.0);

  /// Fan-in uniform initialization U(-sqrt(6/fan_in), +sqrt(6/fan_in)), zero
  /// biases. Deterministic per seed.
  static SkinningField init(int n_handles, int depth, int width, std::uint64_t seed,
                            Vec3 input_center = Vec3::Zero(), double input_scale = 1.0);

  static std::size_t param_count(int n_handles, int depth, int width);

  int n_handles() const { return n_; }
  int depth() const { return depth_; }
  int width() const { return width_; }
  const Vec3& input_center() const { return center_; }
  double input_scale() const { return scale_; }
  int layer_count() const { return depth_ + 1; }
  int layer_in(int layer) const { return layer == 0 ? 3 : width_; }
  int layer_out(int layer) const { return layer == depth_ ? n_ : width_; }
  std::size_t weight_offset(int layer) const { return offsets_[layer]; }
  std::size_t bias_offset(int layer) const {
    return offsets_[layer] + std::size_t(layer_in(layer)) * layer_out(layer);
  }

  std::span<const double> params() const { return params_; }
  std::span<double> params() { return params_; }

  VectorX forward(const Vec3& x) const;
  /// Row i is forward(X[i]).
  MatrixX forward_batch(std::span<const Vec3> X, Exec exec = Exec::parallel) const;
  /// Gradient of sum_i upstream.row(i) . forward(X[i]) with respect to params().
  std::vector<double> backward(std::span<const Vec3> X, const MatrixX& upstream,
                               Exec exec = Exec::parallel) const;

  Vec3 normalize(const Vec3& x) const { return (x - center_) / scale_; }

  friend bool operator==(const SkinningField&, const SkinningField&) = default;

private:
  int n_, depth_, width_;
  Vec3 center_;
  double scale_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

struct AdamState {
  std::uint64_t t = 0;
  std::vector<double> m;
  std::vector<double> v;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update in place. Throws NumericalError on a
/// non-finite gradient ("divergent training step"), leaving theta untouched.
void adam_step(AdamState& state, std::span<double> theta, std::span<const double> grad, double lr);

/// SWGT v1 checkpoint.
void save_checkpoint(const SkinningField& net, const std::filesystem::path& path);
SkinningField load_checkpoint(const std::filesystem::path& path);

} // namespace simplicits
