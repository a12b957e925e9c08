#include "simplicits/scene.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace simplicits {

namespace {

struct Entry {
  std::string key;
  std::string value;
  int line = 0;
};

class Parser {
public:
  Parser(std::string name, std::filesystem::path base) : name_(std::move(name)), base_(std::move(base)) {}

  [[noreturn]] void fail(const Entry& e, const std::string& message) const {
    throw InputError(name_ + ":" + std::to_string(e.line) + ": " + message);
  }

  std::vector<std::string> words(const Entry& e) const {
    std::istringstream in(e.value);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
  }

  double real(const Entry& e, const std::string& text) const {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      fail(e, "'" + e.key + "' expects a number, got '" + text + "'");
    }
    return v;
  }

  double real(const Entry& e) const {
    const auto w = words(e);
    if (w.size() != 1) fail(e, "'" + e.key + "' expects one number");
    return real(e, w[0]);
  }

  template <class Int>
  Int integer(const Entry& e) const {
    const auto w = words(e);
    Int v{};
    if (w.size() == 1) {
      const auto [ptr, ec] = std::from_chars(w[0].data(), w[0].data() + w[0].size(), v);
      if (ec == std::errc() && ptr == w[0].data() + w[0].size()) return v;
    }
    fail(e, "'" + e.key + "' expects an integer, got '" + e.value + "'");
  }

  std::vector<double> reals(const Entry& e, std::size_t count) const {
    const auto w = words(e);
    if (w.size() != count) {
      fail(e, "'" + e.key + "' expects " + std::to_string(count) + " numbers");
    }
    std::vector<double> out;
    for (const auto& s : w) out.push_back(real(e, s));
    return out;
  }

  Vec3 vec3(const Entry& e) const {
    const auto v = reals(e, 3);
    return {v[0], v[1], v[2]};
  }

  std::string word(const Entry& e) const {
    const auto w = words(e);
    if (w.size() != 1) fail(e, "'" + e.key + "' expects a single word");
    return w[0];
  }

  std::filesystem::path file(const Entry& e) const {
    std::filesystem::path p = e.value;
    if (p.empty()) fail(e, "'" + e.key + "' expects a path");
    p = std::filesystem::absolute(base_ / p).lexically_normal();
    if (!std::filesystem::exists(p)) fail(e, "file not found: '" + p.string() + "'");
    return p;
  }

  template <class F>
  auto convert(const Entry& e, F&& f) const {
    try {
      return f();
    } catch (const InputError& err) {
      fail(e, err.what());
    }
  }

private:
  std::string name_;
  std::filesystem::path base_;
};

std::vector<std::string> split_key(const std::string& key) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    parts.push_back(key.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return parts;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_index(const std::string& s, int& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && out >= 0;
}

template <class T>
std::vector<T> contiguous(const std::map<int, T>& items, const std::string& section,
                          const std::string& name) {
  std::vector<T> out;
  for (const auto& [index, item] : items) {
    if (index != int(out.size())) {
      throw InputError(name + ": " + section + " indices must run 0, 1, 2, ... without gaps");
    }
    out.push_back(item);
  }
  return out;
}

void apply_geometry(const Parser& p, const Entry& e, const std::string& k, GeometrySpec& g) {
  if (k == "kind") g.kind = p.convert(e, [&] { return geometry_kind_from_string(p.word(e)); });
  else if (k == "center") g.center = p.vec3(e);
  else if (k == "radius") g.radius = p.real(e);
  else if (k == "lo") g.lo = p.vec3(e);
  else if (k == "hi") g.hi = p.vec3(e);
  else if (k == "size") g.size = p.vec3(e);
  else if (k == "major_radius") g.major_radius = p.real(e);
  else if (k == "minor_radius") g.minor_radius = p.real(e);
  else if (k == "a") g.a = p.vec3(e);
  else if (k == "b") g.b = p.vec3(e);
  else if (k == "file") g.file = p.file(e);
  else if (k == "threshold") g.threshold = p.real(e);
  else if (k == "padding") g.padding = p.real(e);
  else p.fail(e, "unknown key '" + e.key + "'");
}

void apply_material(const Parser& p, const Entry& e, const std::string& k, MaterialRegion& m) {
  if (k == "region") {
    const auto w = p.word(e);
    if (w == "whole") m.shape = MaterialRegion::Shape::whole;
    else if (w == "box") m.shape = MaterialRegion::Shape::box;
    else if (w == "sphere") m.shape = MaterialRegion::Shape::sphere;
    else p.fail(e, "unknown material region '" + w + "' (whole, box, sphere)");
  } else if (k == "lo") m.lo = p.vec3(e);
  else if (k == "hi") m.hi = p.vec3(e);
  else if (k == "center") m.center = p.vec3(e);
  else if (k == "radius") m.radius = p.real(e);
  else if (k == "density") m.density = p.real(e);
  else if (k == "youngs") m.youngs = p.real(e);
  else if (k == "poisson") m.poisson = p.real(e);
  else p.fail(e, "unknown key '" + e.key + "'");
}

void apply_train(const Parser& p, const Entry& e, const std::string& k, TrainConfig& t) {
  if (k == "handles") t.n_handles = p.integer<int>(e);
  else if (k == "depth") t.depth = p.integer<int>(e);
  else if (k == "width") t.width = p.integer<int>(e);
  else if (k == "steps") t.steps = p.integer<int>(e);
  else if (k == "lr_start") t.lr_start = p.real(e);
  else if (k == "lr_end") t.lr_end = p.real(e);
  else if (k == "batch_transforms") t.batch_transforms = p.integer<int>(e);
  else if (k == "cubature") t.cubature_per_step = p.integer<int>(e);
  else if (k == "sigma") t.transform_sigma = p.real(e);
  else if (k == "weight_elastic") t.weight_elastic = p.real(e);
  else if (k == "weight_ortho") t.weight_ortho = p.real(e);
  else if (k == "seed") t.seed = p.integer<std::uint64_t>(e);
  else if (k == "volume_samples") t.volume_samples = p.integer<std::size_t>(e);
  else if (k == "energy") {
    const auto w = p.word(e);
    if (w == "scheduled") t.energy.reset();
    else t.energy = p.convert(e, [&] { return energy_kind_from_string(w); });
  } else p.fail(e, "unknown key '" + e.key + "'");
}

void apply_sim(const Parser& p, const Entry& e, const std::string& k, SimConfig& s) {
  if (k == "dt") s.dt = p.real(e);
  else if (k == "gravity") s.gravity = p.vec3(e);
  else if (k == "newton_iters") s.newton_max_iters = p.integer<int>(e);
  else if (k == "newton_tol") s.newton_tol = p.real(e);
  else if (k == "barrier_iters") s.barrier_iters = p.integer<int>(e);
  else if (k == "kappa0") s.kappa0 = p.real(e);
  else if (k == "kappa_growth") s.kappa_growth = p.real(e);
  else if (k == "dhat") s.barrier_dhat = p.real(e);
  else if (k == "pin_stiffness") s.pin_stiffness = p.real(e);
  else if (k == "energy") s.energy = p.convert(e, [&] { return energy_kind_from_string(p.word(e)); });
  else if (k == "cubature") s.cubature = p.integer<std::size_t>(e);
  else if (k == "seed") s.seed = p.integer<std::uint64_t>(e);
  else if (k == "frames") s.frames = p.integer<int>(e);
  else p.fail(e, "unknown key '" + e.key + "'");
}

void apply_export(const Parser& p, const Entry& e, const std::string& k, ExportSpec& x) {
  if (k == "formats") {
    x.points = x.mesh = x.splats = false;
    for (const auto& w : p.words(e)) {
      if (w == "points") x.points = true;
      else if (w == "mesh") x.mesh = true;
      else if (w == "splats") x.splats = true;
      else if (w != "none") p.fail(e, "unknown export format '" + w + "' (points, mesh, splats, none)");
    }
  } else if (k == "stride") x.stride = p.integer<int>(e);
  else if (k == "mesh") x.mesh_file = p.file(e);
  else if (k == "splats") x.splat_file = p.file(e);
  else p.fail(e, "unknown key '" + e.key + "'");
}

void apply_pin(const Parser& p, const Entry& e, const std::string& k, PinGroup& g) {
  if (k == "region") {
    const auto w = p.word(e);
    if (w == "box") g.shape = PinGroup::Shape::box;
    else if (w == "sphere") g.shape = PinGroup::Shape::sphere;
    else p.fail(e, "unknown pin region '" + w + "' (box, sphere)");
  } else if (k == "lo") g.lo = p.vec3(e);
  else if (k == "hi") g.hi = p.vec3(e);
  else if (k == "center") g.center = p.vec3(e);
  else if (k == "radius") g.radius = p.real(e);
  else if (k == "axes") {
    const auto w = p.word(e);
    g.axes = {false, false, false};
    for (char c : w) {
      if (c < 'x' || c > 'z') p.fail(e, "pin axes are letters from 'xyz', got '" + w + "'");
      g.axes[std::size_t(c - 'x')] = true;
    }
  } else p.fail(e, "unknown key '" + e.key + "'");
}

void apply_collider(const Parser& p, const Entry& e, const std::string& k, Collider& c) {
  if (k == "kind") c.kind = p.convert(e, [&] { return collider_kind_from_string(p.word(e)); });
  else if (k == "height") c.height = p.real(e);
  else if (k == "center") c.center = p.vec3(e);
  else if (k == "radius") c.radius = p.real(e);
  else if (k == "half_extent") c.half_extent = p.vec3(e);
  else p.fail(e, "unknown key '" + e.key + "'");
}

struct ScriptEntry {
  std::optional<int> pin;
  Vec3 pivot = Vec3::Zero();
  std::map<int, Keyframe> keyframes;
  Entry first;
};

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

std::string fmt(const Vec3& v) { return fmt(v.x()) + " " + fmt(v.y()) + " " + fmt(v.z()); }

} // namespace

void SceneConfig::validate() const {
  if (materials.empty() || materials.front().shape != MaterialRegion::Shape::whole) {
    throw InputError("material.0 must cover the whole object (region = whole)");
  }
  for (const auto& m : materials) m.validate();
  train.validate();
  sim.validate();
  if (exports.stride < 1) throw InputError("export.stride must be >= 1");
  if (exports.mesh && exports.mesh_file.empty()) {
    throw InputError("export.formats includes mesh but export.mesh is not set");
  }
  if (exports.splats && exports.splat_file.empty()) {
    throw InputError("export.formats includes splats but export.splats is not set");
  }
}

SceneConfig parse_scene_text(const std::string& text, const std::filesystem::path& base_dir,
                             const std::string& name) {
  Parser p(name, base_dir);
  SceneConfig scene;
  std::map<int, MaterialRegion> materials;
  std::map<int, PinGroup> pins;
  std::map<int, Collider> colliders;
  std::map<int, ScriptEntry> scripts;
  std::map<std::string, int> seen;

  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    Entry e{eq == std::string::npos ? line : trim(line.substr(0, eq)),
            eq == std::string::npos ? "" : trim(line.substr(eq + 1)), line_no};
    if (eq == std::string::npos || e.key.empty()) p.fail(e, "expected 'section.key = value'");
    if (e.value.empty()) p.fail(e, "'" + e.key + "' has no value");
    if (const auto [it, fresh] = seen.emplace(e.key, line_no); !fresh) {
      p.fail(e, "'" + e.key + "' repeats line " + std::to_string(it->second));
    }

    const auto parts = split_key(e.key);
    const std::string& section = parts[0];
    int index = 0;
    auto indexed = [&](std::size_t size) {
      if (parts.size() != size || !parse_index(parts[1], index)) {
        p.fail(e, "unknown key '" + e.key + "' (expected " + section + ".N.key)");
      }
    };
    if (parts.size() == 2 && section == "geometry") apply_geometry(p, e, parts[1], scene.geometry);
    else if (parts.size() == 2 && section == "train") apply_train(p, e, parts[1], scene.train);
    else if (parts.size() == 2 && section == "sim") apply_sim(p, e, parts[1], scene.sim);
    else if (parts.size() == 2 && section == "export") apply_export(p, e, parts[1], scene.exports);
    else if (section == "material") {
      indexed(3);
      apply_material(p, e, parts[2], materials[index]);
    } else if (section == "pins") {
      indexed(3);
      apply_pin(p, e, parts[2], pins[index]);
    } else if (section == "colliders") {
      indexed(3);
      apply_collider(p, e, parts[2], colliders[index]);
    } else if (section == "script") {
      if (parts.size() < 3 || !parse_index(parts[1], index)) p.fail(e, "unknown key '" + e.key + "'");
      ScriptEntry& s = scripts[index];
      if (s.first.line == 0) s.first = e;
      int frame = 0;
      if (parts.size() == 3 && parts[2] == "pin") s.pin = p.integer<int>(e);
      else if (parts.size() == 3 && parts[2] == "pivot") s.pivot = p.vec3(e);
      else if (parts.size() == 4 && parts[2] == "keyframe" && parse_index(parts[3], frame)) {
        const auto v = p.reals(e, 7);
        s.keyframes[frame] = {v[0], {v[1], v[2], v[3]}, {v[4], v[5], v[6]}};
      } else p.fail(e, "unknown key '" + e.key + "'");
    } else {
      p.fail(e, "unknown key '" + e.key + "'");
    }
  }

  if (!materials.empty()) scene.materials = contiguous(materials, "material", name);
  scene.sim.pins = contiguous(pins, "pins", name);
  scene.sim.colliders = contiguous(colliders, "colliders", name);
  for (const auto& [index, s] : scripts) {
    if (!s.pin) p.fail(s.first, "script." + std::to_string(index) + " needs a 'pin' key");
    if (*s.pin < 0 || std::size_t(*s.pin) >= scene.sim.pins.size()) {
      p.fail(s.first, "script." + std::to_string(index) + " refers to missing pins." +
                          std::to_string(*s.pin));
    }
    auto& target = scene.sim.pins[std::size_t(*s.pin)].script;
    if (target) p.fail(s.first, "pins." + std::to_string(*s.pin) + " already has a script");
    target = Script{};
    target->pivot = s.pivot;
    target->keyframes = contiguous(s.keyframes, "keyframe", name);
  }
  try {
    scene.validate();
  } catch (const InputError& err) {
    throw InputError(name + ": " + err.what());
  }
  return scene;
}

SceneConfig parse_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read scene '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scene_text(text.str(), std::filesystem::absolute(path).parent_path(), path.string());
}

std::string serialize_scene(const SceneConfig& s) {
  std::ostringstream out;
  auto kv = [&](const std::string& key, const std::string& value) {
    out << key << " = " << value << '\n';
  };
  const auto& g = s.geometry;
  kv("geometry.kind", to_string(g.kind));
  kv("geometry.center", fmt(g.center));
  kv("geometry.radius", fmt(g.radius));
  kv("geometry.lo", fmt(g.lo));
  kv("geometry.hi", fmt(g.hi));
  kv("geometry.size", fmt(g.size));
  kv("geometry.major_radius", fmt(g.major_radius));
  kv("geometry.minor_radius", fmt(g.minor_radius));
  kv("geometry.a", fmt(g.a));
  kv("geometry.b", fmt(g.b));
  if (!g.file.empty()) kv("geometry.file", g.file.string());
  kv("geometry.threshold", fmt(g.threshold));
  kv("geometry.padding", fmt(g.padding));
  out << '\n';

  for (std::size_t i = 0; i < s.materials.size(); ++i) {
    const auto& m = s.materials[i];
    const std::string prefix = "material." + std::to_string(i) + ".";
    const char* region = m.shape == MaterialRegion::Shape::whole ? "whole"
                         : m.shape == MaterialRegion::Shape::box ? "box"
                                                                 : "sphere";
    kv(prefix + "region", region);
    kv(prefix + "lo", fmt(m.lo));
    kv(prefix + "hi", fmt(m.hi));
    kv(prefix + "center", fmt(m.center));
    kv(prefix + "radius", fmt(m.radius));
    kv(prefix + "density", fmt(m.density));
    kv(prefix + "youngs", fmt(m.youngs));
    kv(prefix + "poisson", fmt(m.poisson));
    out << '\n';
  }

  const auto& t = s.train;
  kv("train.handles", std::to_string(t.n_handles));
  kv("train.depth", std::to_string(t.depth));
  kv("train.width", std::to_string(t.width));
  kv("train.steps", std::to_string(t.steps));
  kv("train.lr_start", fmt(t.lr_start));
  kv("train.lr_end", fmt(t.lr_end));
  kv("train.batch_transforms", std::to_string(t.batch_transforms));
  kv("train.cubature", std::to_string(t.cubature_per_step));
  kv("train.sigma", fmt(t.transform_sigma));
  kv("train.weight_elastic", fmt(t.weight_elastic));
  kv("train.weight_ortho", fmt(t.weight_ortho));
  kv("train.seed", std::to_string(t.seed));
  kv("train.volume_samples", std::to_string(t.volume_samples));
  kv("train.energy", t.energy ? to_string(*t.energy) : "scheduled");
  out << '\n';

  const auto& m = s.sim;
  kv("sim.dt", fmt(m.dt));
  kv("sim.gravity", fmt(m.gravity));
  kv("sim.newton_iters", std::to_string(m.newton_max_iters));
  kv("sim.newton_tol", fmt(m.newton_tol));
  kv("sim.barrier_iters", std::to_string(m.barrier_iters));
  kv("sim.kappa0", fmt(m.kappa0));
  kv("sim.kappa_growth", fmt(m.kappa_growth));
  if (m.barrier_dhat) kv("sim.dhat", fmt(*m.barrier_dhat));
  if (m.pin_stiffness) kv("sim.pin_stiffness", fmt(*m.pin_stiffness));
  kv("sim.energy", to_string(m.energy));
  kv("sim.cubature", std::to_string(m.cubature));
  kv("sim.seed", std::to_string(m.seed));
  kv("sim.frames", std::to_string(m.frames));
  out << '\n';

  const auto& x = s.exports;
  std::string formats;
  if (x.points) formats += "points ";
  if (x.mesh) formats += "mesh ";
  if (x.splats) formats += "splats ";
  kv("export.formats", formats.empty() ? "none" : trim(formats));
  kv("export.stride", std::to_string(x.stride));
  if (!x.mesh_file.empty()) kv("export.mesh", x.mesh_file.string());
  if (!x.splat_file.empty()) kv("export.splats", x.splat_file.string());

  int script_index = 0;
  for (std::size_t i = 0; i < m.pins.size(); ++i) {
    const auto& pin = m.pins[i];
    const std::string prefix = "pins." + std::to_string(i) + ".";
    out << '\n';
    kv(prefix + "region", pin.shape == PinGroup::Shape::box ? "box" : "sphere");
    kv(prefix + "lo", fmt(pin.lo));
    kv(prefix + "hi", fmt(pin.hi));
    kv(prefix + "center", fmt(pin.center));
    kv(prefix + "radius", fmt(pin.radius));
    std::string axes;
    for (int a = 0; a < 3; ++a)
      if (pin.axes[std::size_t(a)]) axes += char('x' + a);
    kv(prefix + "axes", axes);
    if (!pin.script) continue;
    const std::string sp = "script." + std::to_string(script_index++) + ".";
    kv(sp + "pin", std::to_string(i));
    kv(sp + "pivot", fmt(pin.script->pivot));
    for (std::size_t k = 0; k < pin.script->keyframes.size(); ++k) {
      const auto& f = pin.script->keyframes[k];
      kv(sp + "keyframe." + std::to_string(k),
         fmt(f.time) + " " + fmt(f.rotation) + " " + fmt(f.translation));
    }
  }
  for (std::size_t i = 0; i < m.colliders.size(); ++i) {
    const auto& c = m.colliders[i];
    const std::string prefix = "colliders." + std::to_string(i) + ".";
    out << '\n';
    kv(prefix + "kind", to_string(c.kind));
    kv(prefix + "height", fmt(c.height));
    kv(prefix + "center", fmt(c.center));
    kv(prefix + "radius", fmt(c.radius));
    kv(prefix + "half_extent", fmt(c.half_extent));
  }
  return out.str();
}

OccupancyField build_field(const SceneConfig& scene) {
  return OccupancyField::build(scene.geometry, scene.materials);
}

} // namespace simplicits
