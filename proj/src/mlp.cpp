#include "simplicits/mlp.hpp"

#include "binary_io.hpp"

#include <cmath>
#include <fstream>
#include <random>

namespace simplicits {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWeights = Eigen::Map<const RowMatrix>;
using Weights = Eigen::Map<RowMatrix>;
using ConstBias = Eigen::Map<const VectorX>;

// Activations of one chunk, one column per point.
struct ChunkTrace {
  std::vector<MatrixX> pre;  // pre-activation per layer
  std::vector<MatrixX> post; // post[0] is the normalized input
};

MatrixX normalized_inputs(const SkinningField& net, std::span<const Vec3> X) {
  MatrixX a(3, Eigen::Index(X.size()));
  for (std::size_t i = 0; i < X.size(); ++i) a.col(Eigen::Index(i)) = net.normalize(X[i]);
  return a;
}

ChunkTrace trace_chunk(const SkinningField& net, std::span<const Vec3> X) {
  const auto theta = net.params();
  ChunkTrace t;
  t.post.push_back(normalized_inputs(net, X));
  for (int l = 0; l < net.layer_count(); ++l) {
    ConstWeights W(theta.data() + net.weight_offset(l), net.layer_out(l), net.layer_in(l));
    ConstBias b(theta.data() + net.bias_offset(l), net.layer_out(l));
    MatrixX z = W * t.post.back();
    z.colwise() += b;
    MatrixX a = l + 1 < net.layer_count() ? MatrixX(z.unaryExpr([](double u) { return elu(u); }))
                                          : z;
    t.pre.push_back(std::move(z));
    t.post.push_back(std::move(a));
  }
  return t;
}

void check_dims(int n, int depth, int width) {
  if (n < 1 || depth < 1 || width < 1) {
    throw InputError("network needs n_handles >= 1, depth >= 1, width >= 1");
  }
}

} // namespace

SkinningField::SkinningField(int n_handles, int depth, int width, Vec3 input_center,
                             double input_scale)
    : n_(n_handles), depth_(depth), width_(width), center_(std::move(input_center)),
      scale_(input_scale) {
  check_dims(n_, depth_, width_);
  if (!(std::isfinite(scale_) && scale_ > 0.0) || !center_.allFinite()) {
    throw InputError("network input normalization needs a finite center and scale > 0");
  }
  std::size_t off = 0;
  for (int l = 0; l < layer_count(); ++l) {
    offsets_.push_back(off);
    off += std::size_t(layer_in(l) + 1) * layer_out(l);
  }
  params_.assign(off, 0.0);
}

std::size_t SkinningField::param_count(int n_handles, int depth, int width) {
  check_dims(n_handles, depth, width);
  return std::size_t(3 + 1) * width + std::size_t(depth - 1) * (width + 1) * width +
         std::size_t(width + 1) * n_handles;
}

SkinningField SkinningField::init(int n_handles, int depth, int width, std::uint64_t seed,
                                  Vec3 input_center, double input_scale) {
  SkinningField net(n_handles, depth, width, std::move(input_center), input_scale);
  std::mt19937_64 rng(seed);
  for (int l = 0; l < net.layer_count(); ++l) {
    const double bound = std::sqrt(6.0 / net.layer_in(l));
    std::uniform_real_distribution<double> dist(-bound, bound);
    const std::size_t begin = net.weight_offset(l);
    const std::size_t end = net.bias_offset(l);
    for (std::size_t i = begin; i < end; ++i) net.params_[i] = dist(rng);
  }
  return net;
}

VectorX SkinningField::forward(const Vec3& x) const {
  return forward_batch(std::span<const Vec3>(&x, 1), Exec::serial).row(0).transpose();
}

MatrixX SkinningField::forward_batch(std::span<const Vec3> X, Exec exec) const {
  MatrixX out(Eigen::Index(X.size()), n_);
  const std::size_t chunks = chunk_count(X.size());
  for_each_index(exec, chunks, [&](std::size_t c) {
    const std::size_t begin = c * kPointChunk;
    const std::size_t len = std::min(kPointChunk, X.size() - begin);
    ChunkTrace t = trace_chunk(*this, X.subspan(begin, len));
    out.middleRows(Eigen::Index(begin), Eigen::Index(len)) = t.post.back().transpose();
  });
  return out;
}

std::vector<double> SkinningField::backward(std::span<const Vec3> X, const MatrixX& upstream,
                                            Exec exec) const {
  if (upstream.rows() != Eigen::Index(X.size()) || upstream.cols() != n_) {
    throw InputError("backward: upstream shape does not match forward_batch output");
  }
  const std::size_t chunks = chunk_count(X.size());
  std::vector<VectorX> partial(chunks);
  for_each_index(exec, chunks, [&](std::size_t c) {
    const std::size_t begin = c * kPointChunk;
    const std::size_t len = std::min(kPointChunk, X.size() - begin);
    ChunkTrace t = trace_chunk(*this, X.subspan(begin, len));
    VectorX g = VectorX::Zero(Eigen::Index(params_.size()));
    MatrixX delta = upstream.middleRows(Eigen::Index(begin), Eigen::Index(len)).transpose();
    for (int l = layer_count() - 1; l >= 0; --l) {
      Weights gW(g.data() + weight_offset(l), layer_out(l), layer_in(l));
      gW.noalias() = delta * t.post[l].transpose();
      Eigen::Map<VectorX>(g.data() + bias_offset(l), layer_out(l)) = delta.rowwise().sum();
      if (l == 0) break;
      ConstWeights W(params_.data() + weight_offset(l), layer_out(l), layer_in(l));
      // ELU'(u) = 1 for u >= 0, else ELU(u) + 1.
      const MatrixX& z = t.pre[l - 1];
      const MatrixX& a = t.post[l];
      MatrixX slope = (z.array() >= 0.0).select(MatrixX::Ones(z.rows(), z.cols()), a.array() + 1.0);
      delta = (W.transpose() * delta).cwiseProduct(slope);
    }
    partial[c] = std::move(g);
  });
  VectorX total = partial.empty() ? VectorX::Zero(Eigen::Index(params_.size()))
                                  : tree_sum(std::move(partial));
  return {total.data(), total.data() + total.size()};
}

void adam_step(AdamState& state, std::span<double> theta, std::span<const double> grad, double lr) {
  if (theta.size() != grad.size() || state.m.size() != theta.size() ||
      state.v.size() != theta.size()) {
    throw InputError("adam_step: array lengths do not match");
  }
  for (double g : grad) {
    if (!std::isfinite(g)) throw NumericalError("divergent training step: non-finite gradient");
  }
  state.t += 1;
  const double c1 = 1.0 - std::pow(state.beta1, double(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, double(state.t));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    theta[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

void save_checkpoint(const SkinningField& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  binary::put_magic(out, "SWGT");
  binary::put<std::uint32_t>(out, 1);
  binary::put<std::uint32_t>(out, std::uint32_t(net.n_handles()));
  binary::put<std::uint32_t>(out, std::uint32_t(net.depth()));
  binary::put<std::uint32_t>(out, std::uint32_t(net.width()));
  for (int k = 0; k < 3; ++k) binary::put<double>(out, net.input_center()[k]);
  binary::put<double>(out, net.input_scale());
  binary::put<std::uint64_t>(out, net.params().size());
  for (double p : net.params()) binary::put<double>(out, p);
  if (!out) throw InputError("write failed for '" + path.string() + "'");
}

SkinningField load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path.string() + "'");
  const std::string what = path.string();
  binary::expect_magic(in, "SWGT", what);
  const auto version = binary::get<std::uint32_t>(in, what);
  if (version != 1) throw InputError(what + ": unsupported checkpoint version " + std::to_string(version));
  const auto n = binary::get<std::uint32_t>(in, what);
  const auto depth = binary::get<std::uint32_t>(in, what);
  const auto width = binary::get<std::uint32_t>(in, what);
  Vec3 center;
  for (int k = 0; k < 3; ++k) center[k] = binary::get<double>(in, what);
  const auto scale = binary::get<double>(in, what);
  const auto count = binary::get<std::uint64_t>(in, what);
  SkinningField net(int(n), int(depth), int(width), center, scale);
  if (count != net.params().size()) throw InputError(what + ": parameter count does not match layer shapes");
  for (double& p : net.params()) p = binary::get<double>(in, what);
  return net;
}

} // namespace simplicits
