#include <chiral/config.hpp>

#include <chiral/errors.hpp>

#include <json.hpp>

#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace chiral {

using nlohmann::json;

namespace {

constexpr double kMm = 1e-3;

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
}

void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  expect_object(j, path);
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) fail(path + "." + key, "unknown key");
  }
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

double number(const json& obj, const char* key, const std::string& path, double fallback) {
  return obj.contains(key) ? number(obj.at(key), path + "." + key) : fallback;
}

double positive(const json& obj, const char* key, const std::string& path, double fallback) {
  const double v = number(obj, key, path, fallback);
  if (!(v > 0.0)) fail(path + "." + key, "must be positive");
  return v;
}

int integer(const json& obj, const char* key, const std::string& path, int fallback, int min) {
  if (!obj.contains(key)) return fallback;
  const json& j = obj.at(key);
  if (!j.is_number_integer()) fail(path + "." + key, "expected an integer");
  const auto v = j.get<long long>();
  if (v < min || v > 1'000'000'000) fail(path + "." + key, "must be at least " + std::to_string(min));
  return static_cast<int>(v);
}

bool boolean(const json& obj, const char* key, const std::string& path, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_boolean()) fail(path + "." + key, "expected true or false");
  return obj.at(key).get<bool>();
}

std::string string(const json& obj, const char* key, const std::string& path) {
  if (!obj.contains(key)) fail(path + "." + key, "missing");
  if (!obj.at(key).is_string()) fail(path + "." + key, "expected a string");
  return obj.at(key).get<std::string>();
}

template <int N>
Eigen::Matrix<double, N, 1> vec(const json& obj, const char* key, const std::string& path,
                                const Eigen::Matrix<double, N, 1>& fallback, double scale = 1.0) {
  if (!obj.contains(key)) return fallback;
  const json& j = obj.at(key);
  const std::string p = path + "." + key;
  if (!j.is_array() || j.size() != N) fail(p, "expected an array of " + std::to_string(N) + " numbers");
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v[i] = number(j[static_cast<std::size_t>(i)], p + "[" + std::to_string(i) + "]") * scale;
  return v;
}

BiIsotropicMaterial parse_material(const json& j, const std::string& path) {
  allow_keys(j, path, {"eps_r", "sigma", "mu_r", "kappa", "chi"});
  BiIsotropicMaterial m;
  m.eps_r = positive(j, "eps_r", path, 1.0);
  m.sigma = number(j, "sigma", path, 0.0);
  if (m.sigma < 0.0) fail(path + ".sigma", "must be non-negative");
  m.mu_r = positive(j, "mu_r", path, 1.0);
  m.kappa = number(j, "kappa", path, 0.0);
  m.chi = number(j, "chi", path, 0.0);
  return m;
}

const BiIsotropicMaterial& material_ref(const RunConfig& cfg, const json& obj, const char* key, const std::string& path) {
  const std::string name = string(obj, key, path);
  const auto it = cfg.materials.find(name);
  if (it == cfg.materials.end()) fail(path + "." + key, "unknown material '" + name + "'");
  return it->second;
}

int axis_index(const json& obj, const char* key, const std::string& path, int fallback) {
  if (!obj.contains(key)) return fallback;
  const std::string a = string(obj, key, path);
  if (a == "x") return 0;
  if (a == "y") return 1;
  if (a == "z") return 2;
  fail(path + "." + key, "expected x, y or z");
}

Eigen::Vector3d unit(const Eigen::Vector3d& v, const std::string& path) {
  if (!(v.norm() > 0.0)) fail(path, "must be non-zero");
  return v.normalized();
}

Scene parse_scene(const RunConfig& cfg, const json& j, const std::string& path) {
  expect_object(j, path);
  if (j.contains("phantom")) {
    allow_keys(j, path, {"phantom"});
    const json& p = j.at("phantom");
    const std::string pp = path + ".phantom";
    allow_keys(p, pp,
               {"preset", "domain_mm", "matching", "head", "inclusion", "head_semiaxes_mm", "inclusion_semiaxes_mm",
                "inclusion_offset_mm", "inclusion_euler_deg"});
    PhantomParams params;
    const std::string preset = p.contains("preset") ? string(p, "preset", pp) : "full";
    if (preset == "mini") {
      params = PhantomParams::mini();
    } else if (preset == "full") {
      params = PhantomParams::full_size();
    } else {
      fail(pp + ".preset", "expected full or mini");
    }
    params.frequency = cfg.frequency;
    params.domain_size = vec<3>(p, "domain_mm", pp, params.domain_size, kMm);
    if (p.contains("matching")) params.matching = material_ref(cfg, p, "matching", pp);
    if (p.contains("head")) params.head = material_ref(cfg, p, "head", pp);
    if (p.contains("inclusion")) params.inclusion = material_ref(cfg, p, "inclusion", pp);
    params.head_semiaxes = vec<3>(p, "head_semiaxes_mm", pp, params.head_semiaxes, kMm);
    params.inclusion_semiaxes = vec<3>(p, "inclusion_semiaxes_mm", pp, params.inclusion_semiaxes, kMm);
    params.inclusion_offset = vec<3>(p, "inclusion_offset_mm", pp, params.inclusion_offset, kMm);
    params.inclusion_euler = vec<3>(p, "inclusion_euler_deg", pp, params.inclusion_euler, std::numbers::pi / 180.0);
    try {
      return build_head_scene(params);
    } catch (const GeometryError& e) {
      fail(pp, e.what());
    }
  }

  allow_keys(j, path, {"background", "domain_mm", "shapes"});
  Scene scene;
  scene.frequency = cfg.frequency;
  scene.background = material_ref(cfg, j, "background", path);
  if (!j.contains("domain_mm")) fail(path + ".domain_mm", "missing");
  scene.domain_size = vec<3>(j, "domain_mm", path, Eigen::Vector3d::Zero(), kMm);
  if (!(scene.domain_size.array() > 0.0).all()) fail(path + ".domain_mm", "must be positive");
  if (j.contains("shapes")) {
    const json& shapes = j.at("shapes");
    if (!shapes.is_array()) fail(path + ".shapes", "expected an array");
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      const json& s = shapes[i];
      const std::string sp = path + ".shapes[" + std::to_string(i) + "]";
      expect_object(s, sp);
      const std::string type = string(s, "type", sp);
      SceneShape shape;
      shape.name = s.contains("name") ? string(s, "name", sp) : type + std::to_string(i);
      if (type == "ellipsoid") {
        allow_keys(s, sp, {"type", "name", "material", "center_mm", "semiaxes_mm", "euler_deg"});
        Ellipsoid e;
        e.center = vec<3>(s, "center_mm", sp, Eigen::Vector3d::Zero(), kMm);
        if (!s.contains("semiaxes_mm")) fail(sp + ".semiaxes_mm", "missing");
        e.semiaxes = vec<3>(s, "semiaxes_mm", sp, Eigen::Vector3d::Zero(), kMm);
        if (!(e.semiaxes.array() > 0.0).all()) fail(sp + ".semiaxes_mm", "must be positive");
        e.euler = vec<3>(s, "euler_deg", sp, Eigen::Vector3d::Zero(), std::numbers::pi / 180.0);
        shape.shape = e;
      } else if (type == "box") {
        allow_keys(s, sp, {"type", "name", "material", "corner_mm", "size_mm"});
        Box b;
        if (!s.contains("corner_mm") || !s.contains("size_mm")) fail(sp, "box needs corner_mm and size_mm");
        b.corner = vec<3>(s, "corner_mm", sp, Eigen::Vector3d::Zero(), kMm);
        b.size = vec<3>(s, "size_mm", sp, Eigen::Vector3d::Zero(), kMm);
        if (!(b.size.array() > 0.0).all()) fail(sp + ".size_mm", "must be positive");
        shape.shape = b;
      } else {
        fail(sp + ".type", "expected ellipsoid or box");
      }
      shape.material = material_ref(cfg, s, "material", sp);
      scene.shapes.push_back(std::move(shape));
    }
  }
  try {
    validate(scene);
  } catch (const PhysicsError& e) {
    fail(path, e.what());
  }
  return scene;
}

GridSettings parse_grid(const json& j, const std::string& path) {
  allow_keys(j, path, {"cell_size_mm", "boundary", "absorber_cells", "supersample"});
  GridSettings g;
  g.cell_size = positive(j, "cell_size_mm", path, g.cell_size / kMm) * kMm;
  if (j.contains("boundary")) {
    const json& b = j.at("boundary");
    const std::string bp = path + ".boundary";
    if (b.is_string()) {
      g.boundary.fill(boundary_from_string(b.get<std::string>()));
    } else if (b.is_array() && b.size() == 3) {
      for (std::size_t a = 0; a < 3; ++a) {
        if (!b[a].is_string()) fail(bp, "expected boundary names");
        try {
          g.boundary[a] = boundary_from_string(b[a].get<std::string>());
        } catch (const ConfigError& e) {
          fail(bp, e.what());
        }
      }
    } else {
      fail(bp, "expected a boundary name or an array of three");
    }
  }
  g.absorber_cells = integer(j, "absorber_cells", path, g.absorber_cells, 8);
  g.supersample = integer(j, "supersample", path, g.supersample, 1);
  if (g.supersample > 2) fail(path + ".supersample", "must be 1 or 2");
  return g;
}

ScanConfig parse_scan(RunConfig& cfg, const json& j, const std::string& path) {
  allow_keys(j, path,
             {"cells", "pitch_mm", "center_mm", "tx_polarization", "rx_polarization", "aperture_mm", "standoff_mm",
              "tube_rays", "tube_cell_size_mm", "engine", "jobs", "abort_fraction"});
  ScanConfig s;
  if (j.contains("cells")) {
    const Eigen::Vector2d cells = vec<2>(j, "cells", path, Eigen::Vector2d::Zero());
    if (cells.x() < 1 || cells.y() < 1 || cells.x() != std::floor(cells.x()) || cells.y() != std::floor(cells.y())) {
      fail(path + ".cells", "expected two positive integers");
    }
    s.columns = static_cast<int>(cells.x());
    s.rows = static_cast<int>(cells.y());
  }
  s.pitch = positive(j, "pitch_mm", path, s.pitch / kMm) * kMm;
  s.center = vec<2>(j, "center_mm", path, s.center, kMm);
  s.tx_polarization = unit(vec<3>(j, "tx_polarization", path, s.tx_polarization), path + ".tx_polarization");
  s.rx_polarization = unit(vec<3>(j, "rx_polarization", path, s.rx_polarization), path + ".rx_polarization");
  if (std::abs(s.tx_polarization.dot(s.rx_polarization)) > 1e-9) {
    fail(path + ".rx_polarization", "must be orthogonal to tx_polarization");
  }
  const Eigen::Vector2d ap = vec<2>(j, "aperture_mm", path, Eigen::Vector2d(s.aperture_across, s.aperture_along), kMm);
  if (!(ap.array() > 0.0).all()) fail(path + ".aperture_mm", "must be positive");
  s.aperture_across = ap.x();
  s.aperture_along = ap.y();
  s.standoff = positive(j, "standoff_mm", path, s.standoff / kMm) * kMm;
  s.tube_rays = integer(j, "tube_rays", path, s.tube_rays, 1);
  s.tube_cell_size = positive(j, "tube_cell_size_mm", path, s.tube_cell_size / kMm) * kMm;
  if (j.contains("engine")) {
    try {
      cfg.engine = engine_from_string(string(j, "engine", path));
    } catch (const ConfigError& e) {
      fail(path + ".engine", e.what());
    }
  }
  s.jobs = integer(j, "jobs", path, s.jobs, 1);
  s.abort_fraction = positive(j, "abort_fraction", path, s.abort_fraction);
  if (s.abort_fraction > 1.0) fail(path + ".abort_fraction", "must not exceed 1");
  return s;
}

void parse_solver(RunConfig& cfg, const json& j, const std::string& path) {
  allow_keys(j, path,
             {"tolerance", "direct_threshold", "max_iterations", "checkpoint", "memory_cap_mb", "absorber_reflection",
              "absorber_order"});
  auto& so = cfg.full_wave.solver;
  auto& ao = cfg.full_wave.assembly;
  so.tolerance = positive(j, "tolerance", path, so.tolerance);
  if (so.tolerance < 1e-10 || so.tolerance > 1e-3) fail(path + ".tolerance", "must lie in [1e-10, 1e-3]");
  so.direct_threshold = integer(j, "direct_threshold", path, static_cast<int>(so.direct_threshold), 0);
  so.max_iterations = integer(j, "max_iterations", path, so.max_iterations, 1);
  so.checkpoint = integer(j, "checkpoint", path, so.checkpoint, 1);
  const int cap_mb = integer(j, "memory_cap_mb", path, static_cast<int>(so.memory_cap_bytes >> 20), 1);
  so.memory_cap_bytes = static_cast<std::size_t>(cap_mb) << 20;
  ao.memory_cap_bytes = so.memory_cap_bytes;
  ao.absorber_reflection = positive(j, "absorber_reflection", path, ao.absorber_reflection);
  if (ao.absorber_reflection >= 1.0) fail(path + ".absorber_reflection", "must be below 1");
  ao.absorber_order = integer(j, "absorber_order", path, ao.absorber_order, 1);
}

SourceSettings parse_source(const json& j, const std::string& path) {
  allow_keys(j, path, {"kind", "center_mm", "normal_axis", "polarization", "aperture_mm", "amplitude", "probe"});
  SourceSettings s;
  const std::string kind = j.contains("kind") ? string(j, "kind", path) : "aperture";
  auto& ap = s.source.aperture;
  ap.center = vec<3>(j, "center_mm", path, ap.center, kMm);
  ap.normal_axis = axis_index(j, "normal_axis", path, ap.normal_axis);
  ap.polarization = unit(vec<3>(j, "polarization", path, ap.polarization), path + ".polarization");
  if (std::abs(ap.polarization[ap.normal_axis]) > 1e-9) fail(path + ".polarization", "must be tangential to the aperture");
  const Eigen::Vector2d size = vec<2>(j, "aperture_mm", path, Eigen::Vector2d(ap.size_across, ap.size_along), kMm);
  if (!(size.array() > 0.0).all()) fail(path + ".aperture_mm", "must be positive");
  ap.size_across = size.x();
  ap.size_along = size.y();
  s.source.amplitude = number(j, "amplitude", path, 1.0);
  if (kind == "plane_wave") {
    s.source.kind = SourceSpec::Kind::plane_wave;
    ap.full_plane = true;
  } else if (kind != "aperture") {
    fail(path + ".kind", "expected aperture or plane_wave");
  }
  if (j.contains("probe")) {
    const json& p = j.at("probe");
    const std::string pp = path + ".probe";
    allow_keys(p, pp, {"center_mm", "polarization", "aperture_mm", "full_plane"});
    ApertureSpec probe = ap;
    probe.center = vec<3>(p, "center_mm", pp, ap.center, kMm);
    probe.polarization = unit(vec<3>(p, "polarization", pp, ap.polarization), pp + ".polarization");
    if (std::abs(probe.polarization[probe.normal_axis]) > 1e-9) fail(pp + ".polarization", "must be tangential");
    const Eigen::Vector2d ps = vec<2>(p, "aperture_mm", pp, Eigen::Vector2d(ap.size_across, ap.size_along), kMm);
    probe.size_across = ps.x();
    probe.size_along = ps.y();
    probe.full_plane = boolean(p, "full_plane", pp, ap.full_plane);
    s.probe = probe;
  }
  return s;
}

SlabSettings parse_slab(const RunConfig& cfg, const json& j, const std::string& path) {
  allow_keys(j, path, {"embedding_in", "embedding_out", "layers", "sweep"});
  SlabSettings s;
  s.stack.frequency = cfg.frequency;
  if (j.contains("embedding_in")) s.stack.embedding_in = material_ref(cfg, j, "embedding_in", path);
  if (j.contains("embedding_out")) s.stack.embedding_out = material_ref(cfg, j, "embedding_out", path);
  if (j.contains("layers")) {
    const json& layers = j.at("layers");
    if (!layers.is_array()) fail(path + ".layers", "expected an array");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string lp = path + ".layers[" + std::to_string(i) + "]";
      allow_keys(layers[i], lp, {"material", "thickness_mm"});
      if (!layers[i].contains("thickness_mm")) fail(lp + ".thickness_mm", "missing");
      slab::Layer layer;
      layer.material = material_ref(cfg, layers[i], "material", lp);
      layer.thickness = number(layers[i].at("thickness_mm"), lp + ".thickness_mm") * kMm;
      if (!(layer.thickness > 0.0)) fail(lp + ".thickness_mm", "must be positive");
      s.stack.layers.push_back(layer);
    }
  }
  if (j.contains("sweep")) {
    const json& w = j.at("sweep");
    const std::string wp = path + ".sweep";
    allow_keys(w, wp, {"layer", "from_mm", "to_mm", "steps"});
    SlabSweep sweep;
    sweep.layer = integer(w, "layer", wp, 0, 0);
    if (sweep.layer >= static_cast<int>(s.stack.layers.size())) fail(wp + ".layer", "no such layer");
    sweep.from = positive(w, "from_mm", wp, sweep.from / kMm) * kMm;
    sweep.to = positive(w, "to_mm", wp, sweep.to / kMm) * kMm;
    if (sweep.to < sweep.from) fail(wp + ".to_mm", "must not be below from_mm");
    sweep.steps = integer(w, "steps", wp, sweep.steps, 1);
    s.sweep = sweep;
  }
  return s;
}

OutputSettings parse_output(const json& j, const std::string& path) {
  allow_keys(j, path, {"directory", "render_scale", "field_dump"});
  OutputSettings o;
  if (j.contains("directory")) o.directory = string(j, "directory", path);
  o.render_scale = integer(j, "render_scale", path, o.render_scale, 1);
  o.field_dump = boolean(j, "field_dump", path, o.field_dump);
  return o;
}

}  // namespace

GridSpec RunConfig::grid_spec() const {
  if (!scene) throw ConfigError("scene: missing");
  if (!grid) throw ConfigError("grid: missing");
  try {
    return make_grid_spec(scene->domain_size, grid->cell_size, grid->boundary, grid->absorber_cells);
  } catch (const PhysicsError& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  }
}

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("not valid JSON: ") + e.what());
  }
  allow_keys(doc, "config",
             {"frequency_hz", "materials", "scene", "grid", "scan", "solver", "source", "slab", "output"});
  RunConfig cfg;
  cfg.text = text;
  cfg.frequency = positive(doc, "frequency_hz", "config", cfg.frequency);
  if (doc.contains("materials")) {
    const json& mats = doc.at("materials");
    expect_object(mats, "materials");
    for (const auto& [name, m] : mats.items()) cfg.materials[name] = parse_material(m, "materials." + name);
  }
  if (doc.contains("scene")) cfg.scene = parse_scene(cfg, doc.at("scene"), "scene");
  if (doc.contains("grid")) cfg.grid = parse_grid(doc.at("grid"), "grid");
  if (doc.contains("solver")) parse_solver(cfg, doc.at("solver"), "solver");
  if (cfg.grid) cfg.full_wave.supersample = cfg.grid->supersample;
  if (doc.contains("scan")) {
    cfg.scan = parse_scan(cfg, doc.at("scan"), "scan");
    if (cfg.scene) validate(*cfg.scan, *cfg.scene);
  }
  if (doc.contains("source")) cfg.source = parse_source(doc.at("source"), "source");
  if (doc.contains("slab")) cfg.slab = parse_slab(cfg, doc.at("slab"), "slab");
  if (doc.contains("output")) cfg.output = parse_output(doc.at("output"), "output");
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace chiral
