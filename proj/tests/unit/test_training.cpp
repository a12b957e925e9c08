#include "simplicits/training.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace simplicits;
namespace fs = std::filesystem;

namespace {

OccupancyField unit_box() {
  GeometrySpec g;
  g.kind = GeometrySpec::Kind::box;
  g.lo = Vec3::Zero();
  g.hi = Vec3::Ones();
  g.padding = 0.0;
  return OccupancyField::build(g);
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.n_handles = 2;
  c.depth = 2;
  c.width = 8;
  c.steps = 5;
  c.batch_transforms = 2;
  c.cubature_per_step = 40;
  c.volume_samples = 2000;
  c.seed = 11;
  return c;
}

LossBatch small_batch(int n, std::mt19937_64& rng, int points, int transforms, double sigma) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  LossBatch b;
  b.volume = 2.5;
  for (int i = 0; i < points; ++i) {
    b.X.emplace_back(u(rng), u(rng), u(rng));
    b.occupancy.push_back(0.5 + 0.5 * std::abs(u(rng)));
    b.lambda.push_back(2.0 + u(rng));
    b.mu.push_back(1.0 + 0.5 * u(rng));
  }
  b.transforms = sample_transforms(n, sigma, transforms, rng);
  b.fd_step = 1e-4;
  return b;
}

} // namespace

TEST_SUITE("training") {

TEST_CASE("config validation and learning-rate schedule") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.learning_rate(0) == 1e-3);
  CHECK(c.learning_rate(c.steps - 1) == 1e-4);
  CHECK(c.learning_rate(4999) == doctest::Approx(1e-3 - 9e-4 * 4999.0 / 9999.0));
  CHECK(c.alpha(0) == 0.0);
  CHECK(c.alpha(5000) == 0.5);
  auto bad = c;
  bad.steps = 0;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = c;
  bad.lr_end = 1e-2;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = c;
  bad.transform_sigma = 0.0;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = c;
  bad.cubature_per_step = 3;
  CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("sampled transforms have the requested spread") {
  std::mt19937_64 rng(1);
  const auto T = sample_transforms(4, 0.3, 500, rng);
  CHECK(T.size() == 500);
  double sum = 0.0, sq = 0.0;
  std::size_t count = 0;
  for (const auto& Z : T) {
    CHECK(Z.n() == 4);
    for (Eigen::Index i = 0; i < Z.flat().size(); ++i) {
      sum += Z.flat()(i);
      sq += Z.flat()(i) * Z.flat()(i);
      ++count;
    }
  }
  const double mean = sum / double(count);
  const double sd = std::sqrt(sq / double(count) - mean * mean);
  CHECK(std::abs(mean) < 4.0 * 0.3 / std::sqrt(double(count)));
  CHECK(std::abs(sd - 0.3) < 0.01);
  std::mt19937_64 a(5), b(5);
  CHECK(sample_transforms(2, 1.0, 3, a)[2].flat() == sample_transforms(2, 1.0, 3, b)[2].flat());
}

TEST_CASE("Gram matrix and orthogonality loss of a constant field") {
  VectorX c(2);
  c << 1.0, 0.5;
  const auto net = oracle::constant_net(c);
  std::vector<Vec3> X{Vec3(0, 0, 0), Vec3(1, 2, 3), Vec3(-1, 0, 4)};
  std::vector<double> phi{1.0, 0.5, 0.75};
  const MatrixX G = gram_matrix(net, X, phi);
  const MatrixX expected = (0.75) * c * c.transpose();
  CHECK((G - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(ortho_loss(net, X, phi) ==
        doctest::Approx((expected - MatrixX::Identity(2, 2)).squaredNorm()).epsilon(1e-14));
  CHECK_THROWS_AS(gram_matrix(net, X, std::vector<double>{1.0}), InputError);
}

TEST_CASE("elastic loss of a constant field is the mean energy of the linear blocks") {
  VectorX c(2);
  c << 0.7, -0.3;
  const auto net = oracle::constant_net(c);
  std::mt19937_64 rng(2);
  auto batch = small_batch(2, rng, 30, 3, 0.2);
  batch.energy = EnergyKind::stable_neohookean;
  // Constant weights: F = I + sum_j c_j A_j at every point.
  double expected = 0.0;
  for (const auto& Z : batch.transforms) {
    Mat3 F = Mat3::Identity();
    for (int j = 0; j < 2; ++j) F += c(j) * Z.handle(j).leftCols<3>();
    for (std::size_t i = 0; i < batch.X.size(); ++i) {
      expected += batch.occupancy[i] * psi_stable_neohookean(F, batch.lambda[i], batch.mu[i]);
    }
  }
  expected *= batch.volume / double(batch.X.size()) / double(batch.transforms.size());
  CHECK(elastic_loss(net, batch) == doctest::Approx(expected).epsilon(1e-8));

  batch.transforms = {HandleTransforms(2), HandleTransforms(2)};
  CHECK(elastic_loss(net, batch) == doctest::Approx(0.0));
}

TEST_CASE("scheduled energy in the loss interpolates the endpoint losses") {
  std::mt19937_64 rng(3);
  const auto net = oracle::random_net(2, 2, 6, rng);
  auto batch = small_batch(2, rng, 20, 2, 0.1);
  batch.alpha = 0.0;
  const double l0 = elastic_loss(net, batch);
  batch.alpha = 1.0;
  const double l1 = elastic_loss(net, batch);
  batch.alpha = 0.3;
  CHECK(elastic_loss(net, batch) == doctest::Approx(0.7 * l0 + 0.3 * l1).epsilon(1e-10));
  batch.energy = EnergyKind::linear;
  CHECK(elastic_loss(net, batch) == doctest::Approx(l0).epsilon(1e-12));
}

TEST_CASE("loss gradient matches finite differences of the loss") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 3; ++trial) {
    const auto net = oracle::random_net(2, 1 + trial, 5, rng, 0.4);
    auto batch = small_batch(2, rng, 12, 2, 0.3);
    batch.alpha = 0.4;
    const LossWeights weights{1.0, 0.7, 3.0};
    const auto eval = evaluate_loss(net, batch, weights, true, Exec::serial);
    CHECK(eval.total == doctest::Approx(eval.elastic / 3.0 + 0.7 * eval.ortho).epsilon(1e-14));
    VectorX theta = Eigen::Map<const VectorX>(net.params().data(), Eigen::Index(net.params().size()));
    auto f = [&](const VectorX& t) {
      SkinningField copy = net;
      std::copy(t.data(), t.data() + t.size(), copy.params().begin());
      return evaluate_loss(copy, batch, weights, false, Exec::serial).total;
    };
    // Small step: ELU kinks make the loss derivative only piecewise smooth.
    const VectorX fd = oracle::fd_gradient(f, theta, 1e-6);
    const VectorX g = Eigen::Map<const VectorX>(eval.gradient.data(), Eigen::Index(eval.gradient.size()));
    CHECK(oracle::rel_error(g, fd) < 1e-5);
  }
}

TEST_CASE("non-finite loss raises a divergence error") {
  std::mt19937_64 rng(5);
  auto net = oracle::random_net(1, 1, 3, rng);
  auto batch = small_batch(1, rng, 5, 1, 0.1);
  net.params()[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_WITH_AS(evaluate_loss(net, batch, {}, false), doctest::Contains("divergent sample"),
                       NumericalError);
}

TEST_CASE("trainer batches and steps are deterministic in the seed") {
  const auto field = unit_box();
  Trainer a(field, tiny_config()), b(field, tiny_config());
  CHECK(a.volume() == b.volume());
  CHECK(a.volume() == doctest::Approx(1.0).epsilon(1e-12));
  const Lame lame = lame_from_young_poisson(5e6, 0.45);
  CHECK(a.loss_weights().elastic_scale == doctest::Approx(lame.lambda + 2.0 * lame.mu));
  const auto ba = a.make_batch(3), bb = b.make_batch(3);
  CHECK(ba.X == bb.X);
  CHECK(ba.transforms[1].flat() == bb.transforms[1].flat());
  CHECK(!(a.make_batch(4).X == ba.X));
  for (int i = 0; i < 3; ++i) {
    const auto ra = a.step(), rb = b.step();
    CHECK(ra.elastic_loss == rb.elastic_loss);
    CHECK(ra.ortho_loss == rb.ortho_loss);
  }
  CHECK(a.net() == b.net());
  CHECK(a.steps_done() == 3);
  auto other = tiny_config();
  other.seed = 12;
  Trainer c(field, other);
  CHECK(!(c.net() == a.net()));
}

TEST_CASE("short training lowers the orthogonality loss and writes a report") {
  const auto field = unit_box();
  auto cfg = tiny_config();
  cfg.steps = 300;
  cfg.lr_start = 1e-2;
  cfg.lr_end = 1e-3;
  cfg.weight_elastic = 0.0;
  cfg.cubature_per_step = 200;
  const auto [net, report] = train(field, cfg);
  REQUIRE(report.steps.size() == 300);
  CHECK(report.skipped_steps == 0);
  double early = 0.0, late = 0.0;
  for (int i = 0; i < 20; ++i) {
    early += report.steps[std::size_t(i)].ortho_loss;
    late += report.steps[std::size_t(280 + i)].ortho_loss;
  }
  CHECK(late < 0.2 * early);
  CHECK(report.gram.rows() == 2);
  CHECK((report.gram - MatrixX::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.2);

  const auto dir = fs::temp_directory_path() / "simplicits_unit";
  fs::create_directories(dir);
  write_train_report_csv(report, dir / "train.csv");
  std::ifstream in(dir / "train.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "step,elastic_loss,ortho_loss,lr,alpha");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 300);
}

} // TEST_SUITE
