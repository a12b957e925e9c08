#include "simplicits/training.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace simplicits {

namespace {

constexpr int kProbesPerPoint = 7; // center, then +h e_k, -h e_k for k = 0, 1, 2
constexpr int kMaxConsecutiveDivergent = 5;
constexpr std::size_t kGramSamples = 10000;
constexpr std::size_t kMaterialProbe = 4096;

std::size_t probe_row(std::size_t point, int k, bool plus) {
  return kProbesPerPoint * point + 1 + 2 * std::size_t(k) + (plus ? 0 : 1);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw InputError(message);
}

MatrixX gram_from_rows(const MatrixX& W, std::span<const double> occupancy, std::size_t stride,
                       Exec exec) {
  const std::size_t N = occupancy.size();
  const Eigen::Index n = W.cols();
  const std::size_t chunks = chunk_count(N);
  std::vector<MatrixX> partial(chunks);
  for_each_index(exec, chunks, [&](std::size_t c) {
    MatrixX G = MatrixX::Zero(n, n);
    const std::size_t end = std::min(N, (c + 1) * kPointChunk);
    for (std::size_t i = c * kPointChunk; i < end; ++i) {
      const auto w = W.row(Eigen::Index(stride * i));
      G.noalias() += occupancy[i] * (w.transpose() * w);
    }
    partial[c] = std::move(G);
  });
  if (partial.empty()) return MatrixX::Zero(n, n);
  return tree_sum(std::move(partial)) / double(N);
}

} // namespace

void TrainConfig::validate() const {
  require(n_handles >= 1, "train.handles must be >= 1");
  require(depth >= 1 && width >= 1, "train.depth and train.width must be >= 1");
  require(steps >= 1, "train.steps must be >= 1");
  require(std::isfinite(lr_end) && lr_end > 0.0 && std::isfinite(lr_start) && lr_start >= lr_end,
          "learning rates need lr_start >= lr_end > 0");
  require(batch_transforms >= 1, "train.batch_transforms must be >= 1");
  require(cubature_per_step >= n_handles, "train.cubature must be at least the handle count");
  require(std::isfinite(transform_sigma) && transform_sigma > 0.0, "train.sigma must be > 0");
  require(std::isfinite(weight_elastic) && weight_elastic >= 0.0 && std::isfinite(weight_ortho) &&
              weight_ortho >= 0.0,
          "loss weights must be non-negative");
  require(volume_samples >= 100, "volume sample count must be >= 100");
}

double TrainConfig::learning_rate(int step) const {
  if (steps <= 1) return lr_start;
  const double t = double(step) / double(steps - 1);
  if (step == steps - 1) return lr_end;
  return lr_start + (lr_end - lr_start) * t;
}

LossBatch LossBatch::from_samples(const std::vector<SamplePoint>& samples, double volume) {
  LossBatch b;
  b.volume = volume;
  for (const auto& s : samples) {
    b.X.push_back(s.X);
    b.occupancy.push_back(s.occupancy);
    b.lambda.push_back(s.lambda);
    b.mu.push_back(s.mu);
  }
  return b;
}

std::vector<HandleTransforms> sample_transforms(int n, double sigma, int batch,
                                                std::mt19937_64& rng) {
  require(std::isfinite(sigma) && sigma > 0.0, "transform sigma must be > 0");
  std::normal_distribution<double> normal(0.0, sigma);
  std::vector<HandleTransforms> out;
  out.reserve(std::size_t(batch));
  for (int b = 0; b < batch; ++b) {
    HandleTransforms Z(n);
    for (Eigen::Index i = 0; i < Z.flat().size(); ++i) Z.flat()(i) = normal(rng);
    out.push_back(std::move(Z));
  }
  return out;
}

MatrixX gram_matrix(const SkinningField& net, std::span<const Vec3> X,
                    std::span<const double> occupancy, Exec exec) {
  require(X.size() == occupancy.size(), "gram_matrix: size mismatch");
  require(!X.empty(), "gram_matrix: no points");
  return gram_from_rows(net.forward_batch(X, exec), occupancy, 1, exec);
}

double ortho_loss(const SkinningField& net, std::span<const Vec3> X,
                  std::span<const double> occupancy, Exec exec) {
  const MatrixX G = gram_matrix(net, X, occupancy, exec);
  return (G - MatrixX::Identity(G.rows(), G.cols())).squaredNorm();
}

LossEvaluation evaluate_loss(const SkinningField& net, const LossBatch& batch,
                             const LossWeights& weights, bool with_gradient, Exec exec) {
  const std::size_t N = batch.X.size();
  const int n = net.n_handles();
  const std::size_t B = batch.transforms.size();
  require(N >= 1, "loss batch has no points");
  require(batch.occupancy.size() == N && batch.lambda.size() == N && batch.mu.size() == N,
          "loss batch arrays differ in length");
  for (const auto& Z : batch.transforms) require(Z.n() == n, "transform handle count mismatch");
  require(batch.fd_step > 0.0, "finite-difference step must be positive");
  const double h = batch.fd_step;

  std::vector<Vec3> probes(kProbesPerPoint * N);
  for (std::size_t i = 0; i < N; ++i) {
    probes[kProbesPerPoint * i] = batch.X[i];
    for (int k = 0; k < 3; ++k) {
      probes[probe_row(i, k, true)] = batch.X[i] + h * Vec3::Unit(k);
      probes[probe_row(i, k, false)] = batch.X[i] - h * Vec3::Unit(k);
    }
  }
  const MatrixX W = net.forward_batch(probes, exec);

  std::vector<std::vector<Mat34>> handles(B);
  for (std::size_t b = 0; b < B; ++b)
    for (int j = 0; j < n; ++j) handles[b].push_back(batch.transforms[b].handle(j));

  auto energy = [&](const Mat3& F, double lambda, double mu) {
    return batch.energy ? psi(*batch.energy, F, lambda, mu)
                        : scheduled_energy(F, lambda, mu, batch.alpha);
  };
  auto stress = [&](const Mat3& F, double lambda, double mu) {
    return batch.energy ? psi_gradient(*batch.energy, F, lambda, mu)
                        : scheduled_gradient(F, lambda, mu, batch.alpha);
  };

  const double elastic_coeff = B > 0 ? batch.volume / double(N) / double(B) : 0.0;
  const double elastic_grad_coeff = weights.elastic / weights.elastic_scale * elastic_coeff;
  MatrixX upstream;
  if (with_gradient) upstream = MatrixX::Zero(Eigen::Index(probes.size()), n);

  const std::size_t chunks = chunk_count(N);
  std::vector<double> partial(chunks, 0.0);
  for_each_index(exec, chunks, [&](std::size_t c) {
    double sum = 0.0;
    const std::size_t end = std::min(N, (c + 1) * kPointChunk);
    for (std::size_t i = c * kPointChunk; i < end; ++i) {
      const double phi = batch.occupancy[i];
      std::array<Eigen::Vector4d, 6> Xh;
      for (int k = 0; k < 3; ++k)
        for (int s = 0; s < 2; ++s) {
          const Vec3& p = probes[probe_row(i, k, s == 0)];
          Xh[2 * k + s] = Eigen::Vector4d(p.x(), p.y(), p.z(), 1.0);
        }
      for (std::size_t b = 0; b < B; ++b) {
        Mat3 F = Mat3::Identity();
        for (int k = 0; k < 3; ++k) {
          const auto wp = W.row(Eigen::Index(probe_row(i, k, true)));
          const auto wm = W.row(Eigen::Index(probe_row(i, k, false)));
          Vec3 diff = Vec3::Zero();
          for (int j = 0; j < n; ++j) {
            diff += wp(j) * (handles[b][j] * Xh[2 * k]) - wm(j) * (handles[b][j] * Xh[2 * k + 1]);
          }
          F.col(k) += diff / (2.0 * h);
        }
        sum += phi * energy(F, batch.lambda[i], batch.mu[i]);
        if (!with_gradient) continue;
        const Mat3 P = stress(F, batch.lambda[i], batch.mu[i]);
        const double s = elastic_grad_coeff * phi / (2.0 * h);
        for (int k = 0; k < 3; ++k) {
          const Eigen::Index rp = Eigen::Index(probe_row(i, k, true));
          const Eigen::Index rm = Eigen::Index(probe_row(i, k, false));
          for (int j = 0; j < n; ++j) {
            upstream(rp, j) += s * P.col(k).dot(handles[b][j] * Xh[2 * k]);
            upstream(rm, j) -= s * P.col(k).dot(handles[b][j] * Xh[2 * k + 1]);
          }
        }
      }
    }
    partial[c] = sum;
  });

  LossEvaluation out;
  out.elastic = elastic_coeff * tree_sum(std::move(partial));

  const MatrixX G = gram_from_rows(W, batch.occupancy, kProbesPerPoint, exec);
  const MatrixX R = G - MatrixX::Identity(n, n);
  out.ortho = R.squaredNorm();
  if (!std::isfinite(out.elastic) || !std::isfinite(out.ortho)) {
    throw NumericalError("divergent sample: non-finite training loss");
  }
  out.total = weights.elastic * out.elastic / weights.elastic_scale + weights.ortho * out.ortho;

  if (with_gradient) {
    // d||G - I||^2 / dW_k = (4 / N) Phi_k (G - I) W_k for symmetric G.
    const double s = weights.ortho * 4.0 / double(N);
    for (std::size_t i = 0; i < N; ++i) {
      const Eigen::Index r = Eigen::Index(kProbesPerPoint * i);
      upstream.row(r) += (s * batch.occupancy[i]) * (R * W.row(r).transpose()).transpose();
    }
    out.gradient = net.backward(probes, upstream, exec);
  }
  return out;
}

double elastic_loss(const SkinningField& net, const LossBatch& batch, Exec exec) {
  return evaluate_loss(net, batch, LossWeights{}, false, exec).elastic;
}

Trainer::Trainer(const OccupancyField& field, TrainConfig config, Exec exec)
    : field_(&field), config_(std::move(config)), exec_(exec),
      net_(1, 1, 1) {
  config_.validate();
  const Aabb& box = field.bbox();
  net_ = SkinningField::init(config_.n_handles, config_.depth, config_.width,
                             mix_seed(config_.seed, 0), box.center(), 0.5 * box.diagonal());
  adam_ = AdamState(net_.params().size());
  volume_ = estimate_volume(field, config_.volume_samples, mix_seed(config_.seed, 1), exec).volume;
  const auto probe = sample_interior(field, kMaterialProbe, mix_seed(config_.seed, 2), exec);
  // P-wave modulus lambda + 2 mu: the stiffest linear mode, so the scaled
  // elastic term stays O(1) as poisson -> 0.5.
  double modulus = 0.0;
  for (const auto& s : probe) modulus += s.lambda + 2.0 * s.mu;
  modulus /= double(probe.size());
  weights_ = {config_.weight_elastic, config_.weight_ortho, volume_ * modulus};
}

LossBatch Trainer::make_batch(int step_index) const {
  std::mt19937_64 rng(mix_seed(mix_seed(config_.seed, 3), std::uint64_t(step_index)));
  const auto samples =
      sample_interior(*field_, std::size_t(config_.cubature_per_step), rng(), exec_);
  LossBatch batch = LossBatch::from_samples(samples, volume_);
  batch.transforms =
      sample_transforms(config_.n_handles, config_.transform_sigma, config_.batch_transforms, rng);
  batch.alpha = config_.alpha(step_index);
  batch.energy = config_.energy;
  batch.fd_step = default_fd_step(net_);
  return batch;
}

TrainStepRecord Trainer::step() {
  if (done()) throw std::logic_error("Trainer::step called after the final step");
  const int index = step_++;
  const LossBatch batch = make_batch(index);
  const LossEvaluation eval = evaluate_loss(net_, batch, weights_, true, exec_);
  const double lr = config_.learning_rate(index);
  adam_step(adam_, net_.params(), eval.gradient, lr);
  return {eval.elastic, eval.ortho, lr, batch.alpha};
}

MatrixX Trainer::final_gram() const {
  const auto samples = sample_interior(*field_, kGramSamples, mix_seed(config_.seed, 4), exec_);
  std::vector<Vec3> X;
  std::vector<double> phi;
  for (const auto& s : samples) {
    X.push_back(s.X);
    phi.push_back(s.occupancy);
  }
  return gram_matrix(net_, X, phi, exec_);
}

std::pair<SkinningField, TrainReport> train(const OccupancyField& field, const TrainConfig& config,
                                            Exec exec, const TrainProgress& progress) {
  Trainer trainer(field, config, exec);
  TrainReport report;
  report.volume = trainer.volume();
  int consecutive = 0;
  while (!trainer.done()) {
    const int index = trainer.steps_done();
    TrainStepRecord rec;
    try {
      rec = trainer.step();
      consecutive = 0;
    } catch (const NumericalError& e) {
      ++report.skipped_steps;
      if (++consecutive > kMaxConsecutiveDivergent) {
        throw NumericalError("training aborted at step " + std::to_string(index) + " after " +
                             std::to_string(consecutive) +
                             " consecutive divergent steps (reduce sigma or lr): " + e.what());
      }
      const double nan = std::numeric_limits<double>::quiet_NaN();
      rec = {nan, nan, config.learning_rate(index), config.alpha(index)};
    }
    report.steps.push_back(rec);
    if (progress) progress(index, rec);
  }
  report.gram = trainer.final_gram();
  return {trainer.net(), std::move(report)};
}

void write_train_report_csv(const TrainReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << "step,elastic_loss,ortho_loss,lr,alpha\n" << std::setprecision(17);
  for (std::size_t i = 0; i < report.steps.size(); ++i) {
    const auto& r = report.steps[i];
    out << i << ',' << r.elastic_loss << ',' << r.ortho_loss << ',' << r.lr << ',' << r.alpha
        << '\n';
  }
  if (!out) throw InputError("write failed for '" + path.string() + "'");
}

} // namespace simplicits
