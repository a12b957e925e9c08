#pragma once

#include "simplicits/elastic.hpp"
#include "simplicits/mlp.hpp"
#include "simplicits/occupancy.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <random>

namespace simplicits {

struct TrainConfig {
  int n_handles = 10;
  int depth = 9;
  int width = 64;
  int steps = 10000;
  double lr_start = 1e-3;
  double lr_end = 1e-4;
  int batch_transforms = 10;
  int cubature_per_step = 1000;
  /// Elementwise standard deviation of the sampled handle matrices.
  double transform_sigma = 0.1;
  double weight_elastic = 1.0;
  double weight_ortho = 1.0;
  std::uint64_t seed = 0;
  /// Fixed training energy; unset means the linear -> neohookean schedule.
  std::optional<EnergyKind> energy;
  std::size_t volume_samples = 100000;

  void validate() const;
  /// Linear from lr_start at step 0 to lr_end at step steps - 1.
  double learning_rate(int step) const;
  /// Energy schedule weight, step / steps.
  double alpha(int step) const { return double(step) / double(steps); }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Everything one loss evaluation depends on, so the loss is a pure function
/// of the network parameters.
struct LossBatch {
  std::vector<Vec3> X;
  std::vector<double> occupancy;
  std::vector<double> lambda;
  std::vector<double> mu;
  double volume = 1.0;
  std::vector<HandleTransforms> transforms;
  double alpha = 0.0;
  std::optional<EnergyKind> energy;
  double fd_step = 1e-4;

  static LossBatch from_samples(const std::vector<SamplePoint>& samples, double volume);
};

struct LossWeights {
  double elastic = 1.0;
  double ortho = 1.0;
  /// The elastic term enters the total as elastic * L_elastic / elastic_scale.
  double elastic_scale = 1.0;
};

struct LossEvaluation {
  double elastic = 0.0;
  double ortho = 0.0;
  double total = 0.0;
  std::vector<double> gradient; // empty unless requested
};

/// Every entry i.i.d. N(0, sigma^2), linear block and translation alike.
std::vector<HandleTransforms> sample_transforms(int n, double sigma, int batch,
                                                std::mt19937_64& rng);

/// Mean over transforms of (V/N) sum_i Phi_i Psi(F_i); F by central differences.
/// Throws NumericalError("divergent sample") when non-finite.
double elastic_loss(const SkinningField& net, const LossBatch& batch, Exec exec = Exec::parallel);

/// G = (1/N) sum_k Phi_k W(X_k) W(X_k)^T, the volume-normalized Gram matrix.
MatrixX gram_matrix(const SkinningField& net, std::span<const Vec3> X,
                    std::span<const double> occupancy, Exec exec = Exec::parallel);

/// ||G - I||_F^2.
double ortho_loss(const SkinningField& net, std::span<const Vec3> X,
                  std::span<const double> occupancy, Exec exec = Exec::parallel);

LossEvaluation evaluate_loss(const SkinningField& net, const LossBatch& batch,
                             const LossWeights& weights, bool with_gradient,
                             Exec exec = Exec::parallel);

struct TrainStepRecord {
  double elastic_loss = 0.0;
  double ortho_loss = 0.0;
  double lr = 0.0;
  double alpha = 0.0;
};

struct TrainReport {
  std::vector<TrainStepRecord> steps;
  MatrixX gram;
  double volume = 0.0;
  int skipped_steps = 0;
};

/// Stateful trainer; one call to step() is one optimizer update.
class Trainer {
public:
  Trainer(const OccupancyField& field, TrainConfig config, Exec exec = Exec::parallel);

  /// Fresh cubature + transforms for a step, deterministic in (seed, step).
  LossBatch make_batch(int step_index) const;
  const LossWeights& loss_weights() const { return weights_; }

  TrainStepRecord step();
  bool done() const { return step_ >= config_.steps; }
  int steps_done() const { return step_; }

  const SkinningField& net() const { return net_; }
  const TrainConfig& config() const { return config_; }
  double volume() const { return volume_; }

  /// Gram matrix on a fresh 10^4-point sample.
  MatrixX final_gram() const;

private:
  const OccupancyField* field_;
  TrainConfig config_;
  Exec exec_;
  SkinningField net_;
  AdamState adam_;
  double volume_ = 0.0;
  LossWeights weights_;
  int step_ = 0;
};

using TrainProgress = std::function<void(int step, const TrainStepRecord&)>;

/// Runs config.steps steps. More than five consecutive divergent steps abort
/// with NumericalError; isolated ones are skipped and logged as NaN rows.
std::pair<SkinningField, TrainReport> train(const OccupancyField& field, const TrainConfig& config,
                                            Exec exec = Exec::parallel,
                                            const TrainProgress& progress = {});

/// CSV columns: step, elastic_loss, ortho_loss, lr, alpha.
void write_train_report_csv(const TrainReport& report, const std::filesystem::path& path);

} // namespace simplicits
