#pragma once

#include "simplicits/occupancy.hpp"
#include "simplicits/reduced_sim.hpp"
#include "simplicits/training.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace simplicits {

struct ExportSpec {
  bool points = true;  // deformed cubature points, XYZ
  bool mesh = false;   // deformed `mesh_file`, OBJ
  bool splats = false; // transformed `splat_file`, SPLT
  int stride = 1;
  std::filesystem::path mesh_file;
  std::filesystem::path splat_file;

  friend bool operator==(const ExportSpec&, const ExportSpec&) = default;
};

/// One experiment. File paths are stored absolute, resolved against the scene
/// file's directory.
struct SceneConfig {
  GeometrySpec geometry;
  std::vector<MaterialRegion> materials{MaterialRegion{}};
  TrainConfig train;
  SimConfig sim;
  ExportSpec exports;

  void validate() const;

  friend bool operator==(const SceneConfig&, const SceneConfig&) = default;
};

/// Line-oriented `section.key = value` text; `#` starts a comment. Unknown or
/// repeated keys are errors reported with the line number.
SceneConfig parse_scene(const std::filesystem::path& path);
SceneConfig parse_scene_text(const std::string& text, const std::filesystem::path& base_dir,
                             const std::string& name = "<scene>");

/// Writes every setting explicitly; parse_scene_text(serialize_scene(s)) == s.
std::string serialize_scene(const SceneConfig& scene);

OccupancyField build_field(const SceneConfig& scene);

} // namespace simplicits
