// Command-line front end: train, simulate, volume, weights-grid.
#include "simplicits/exporters.hpp"
#include "simplicits/scene.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace simplicits;

namespace {

fs::path report_path(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  return p.replace_extension(".train.csv");
}

std::string frame_name(const char* stem, int frame, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04d.%s", stem, frame, ext);
  return buf;
}

int cmd_train(const fs::path& scene_path, const fs::path& out, std::optional<std::uint64_t> seed) {
  SceneConfig scene = parse_scene(scene_path);
  if (seed) scene.train.seed = *seed;
  const OccupancyField field = build_field(scene);
  const int every = std::max(1, scene.train.steps / 20);
  auto progress = [&](int step, const TrainStepRecord& r) {
    if (step % every == 0 || step + 1 == scene.train.steps) {
      std::cerr << "step " << step << "  elastic " << r.elastic_loss << "  ortho " << r.ortho_loss
                << "  lr " << r.lr << '\n';
    }
  };
  const auto [net, report] = train(field, scene.train, Exec::parallel, progress);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_checkpoint(net, out);
  write_train_report_csv(report, report_path(out));
  const MatrixX dev = report.gram - MatrixX::Identity(report.gram.rows(), report.gram.cols());
  std::cout << "volume " << report.volume << " m^3\n"
            << "skipped steps " << report.skipped_steps << '\n'
            << "final |G - I|_inf " << dev.cwiseAbs().rowwise().sum().maxCoeff() << '\n'
            << "wrote " << out.string() << " and " << report_path(out).string() << '\n';
  return 0;
}

int cmd_simulate(const fs::path& scene_path, const fs::path& weights, const fs::path& out,
                 std::optional<int> frames_opt, std::optional<int> stride_opt) {
  const SceneConfig scene = parse_scene(scene_path);
  const SkinningField net = load_checkpoint(weights);
  if (net.n_handles() != scene.train.n_handles) {
    throw InputError("checkpoint has " + std::to_string(net.n_handles()) +
                     " handles but the scene asks for " + std::to_string(scene.train.n_handles));
  }
  const int frames = frames_opt.value_or(scene.sim.frames);
  const int stride = stride_opt.value_or(scene.exports.stride);
  if (frames < 0) throw InputError("--frames must be >= 0");
  if (stride < 1) throw InputError("--stride must be >= 1");

  const OccupancyField field = build_field(scene);
  CubatureSet cub = build_cubature(field, net, scene.sim.cubature, scene.sim.seed,
                                   scene.train.volume_samples);
  const ReducedSim sim(std::move(cub), scene.sim, field.bbox());
  if (sim.regularized()) {
    std::cerr << "warning: reduced mass matrix is rank deficient; Tikhonov regularization enabled\n";
  }
  SimState state = sim.initial_state();

  std::optional<TriangleMesh> mesh;
  std::optional<GaussianSplatSet> splats;
  if (scene.exports.mesh) mesh = read_obj(scene.exports.mesh_file);
  if (scene.exports.splats) splats = read_splats(scene.exports.splat_file);

  fs::create_directories(out);
  std::ofstream csv(out / "transforms.csv", std::ios::trunc);
  std::ofstream log(out / "steps.csv", std::ios::trunc);
  if (!csv || !log) throw InputError("cannot write into '" + out.string() + "'");
  csv << transforms_csv_header(net.n_handles());
  log << "frame,newton_iters,gradient_norm,converged,stalled,min_distance\n";
  log.precision(17);

  int stalls = 0;
  for (int frame = 1; frame <= frames; ++frame) {
    const StepReport rep = sim.step(state);
    int iters = 0;
    for (const auto& s : rep.solves) iters += s.iterations;
    const auto& last = rep.solves.back();
    if (rep.stalled()) {
      ++stalls;
      std::cerr << "warning: line search stalled at frame " << frame << " (|g| = "
                << last.gradient_norm << ")\n";
    }
    csv << transforms_csv_row(frame, state.time, state.z);
    log << frame << ',' << iters << ',' << last.gradient_norm << ',' << last.converged << ','
        << rep.stalled() << ',' << sim.min_distance(state.z) << '\n';

    if (frame % stride != 0) continue;
    const HandleTransforms Z(net.n_handles(), state.z);
    if (scene.exports.points) write_xyz(out / frame_name("points", frame, "xyz"), sim.positions(state.z));
    if (mesh) write_obj(out / frame_name("mesh", frame, "obj"), deform_mesh(*mesh, net, Z));
    if (splats) write_splats(out / frame_name("splats", frame, "splt"), transform_gaussians(*splats, net, Z));
  }
  if (!csv || !log) throw InputError("write failed in '" + out.string() + "'");
  std::cout << "simulated " << frames << " frames into " << out.string();
  if (stalls > 0) std::cout << " (" << stalls << " stalled steps)";
  std::cout << '\n';
  return 0;
}

int cmd_volume(const fs::path& scene_path, std::size_t samples) {
  const SceneConfig scene = parse_scene(scene_path);
  const OccupancyField field = build_field(scene);
  const VolumeEstimate v = estimate_volume(field, samples, scene.train.seed);
  const Aabb& b = field.bbox();
  std::cout.precision(10);
  std::cout << "bbox " << b.lo.transpose() << "  ->  " << b.hi.transpose() << '\n'
            << "volume " << v.volume << " +- " << v.std_error << " m^3 (" << samples
            << " samples)\n";
  return 0;
}

int cmd_weights_grid(const fs::path& weights, std::uint32_t res, const fs::path& out,
                     const std::optional<fs::path>& scene_path) {
  const SkinningField net = load_checkpoint(weights);
  Aabb box;
  if (scene_path) {
    box = build_field(parse_scene(*scene_path)).bbox();
  } else {
    const Vec3 half = Vec3::Constant(net.input_scale() / std::sqrt(3.0));
    box = {net.input_center() - half, net.input_center() + half};
  }
  const auto paths = export_weight_grid(net, box, {res, res, res}, out);
  std::cout << "wrote " << paths.size() << " grids into " << out.string() << '\n';
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mesh-free reduced elastodynamics with neural skinning weights"};
  app.require_subcommand(1);

  fs::path scene, out, weights;
  std::optional<std::uint64_t> seed;
  std::optional<int> frames, stride;
  std::optional<fs::path> grid_scene;
  std::size_t samples = 1000000;
  std::uint32_t res = 32;

  auto* train_cmd = app.add_subcommand("train", "Train skinning weights for a scene");
  train_cmd->add_option("--scene", scene, "Scene file")->required();
  train_cmd->add_option("--out", out, "Output checkpoint (.swgt)")->required();
  train_cmd->add_option("--seed", seed, "Override train.seed");

  auto* sim_cmd = app.add_subcommand("simulate", "Time-step a scene with trained weights");
  sim_cmd->add_option("--scene", scene, "Scene file")->required();
  sim_cmd->add_option("--weights", weights, "Checkpoint from `train`")->required();
  sim_cmd->add_option("--out", out, "Output directory")->required();
  sim_cmd->add_option("--frames", frames, "Override sim.frames");
  sim_cmd->add_option("--stride", stride, "Override export.stride");

  auto* vol_cmd = app.add_subcommand("volume", "Monte-Carlo volume of a scene's geometry");
  vol_cmd->add_option("--scene", scene, "Scene file")->required();
  vol_cmd->add_option("--samples", samples, "Proposal count")->check(CLI::Range(100, 1000000000));

  auto* grid_cmd = app.add_subcommand("weights-grid", "Sample each weight on a regular grid (SVOL)");
  grid_cmd->add_option("--weights", weights, "Checkpoint")->required();
  grid_cmd->add_option("--res", res, "Nodes per axis")->check(CLI::Range(2, 4096));
  grid_cmd->add_option("--out", out, "Output directory")->required();
  grid_cmd->add_option("--scene", grid_scene, "Use this scene's bounding box");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*train_cmd) return cmd_train(scene, out, seed);
    if (*sim_cmd) return cmd_simulate(scene, weights, out, frames, stride);
    if (*vol_cmd) return cmd_volume(scene, samples);
    if (*grid_cmd) return cmd_weights_grid(weights, res, out, grid_scene);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
