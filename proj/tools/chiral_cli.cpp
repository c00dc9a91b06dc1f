// Command-line front end: slab, solve, scan, render, validate.
#include <chiral/config.hpp>
#include <chiral/errors.hpp>
#include <chiral/io.hpp>
#include <chiral/phantom.hpp>
#include <chiral/scan.hpp>
#include <chiral/slab1d.hpp>
#include <chiral/solver3d.hpp>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>

#ifndef CHIRAL_VERSION
#define CHIRAL_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace chiral;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kPhysics = 3, kAborted = 4 };

struct Options {
  std::string config;
  std::string engine;
  int jobs = 0;
  std::string out;
  bool verbose = false;

  // slab flags
  double kappa = 0.5;
  double eps_r = 1.0;
  double sigma = 0.0;
  double thickness_mm = 0.0;

  // render
  std::string map;
  int scale = 0;
  std::string image;
};

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

// --out beats CHIRAL_OUT_DIR beats output.directory
fs::path output_dir(const Options& opt, const RunConfig* cfg) {
  fs::path dir;
  if (!opt.out.empty()) {
    dir = opt.out;
  } else if (const char* env = std::getenv("CHIRAL_OUT_DIR"); env && *env) {
    dir = env;
  } else if (cfg) {
    dir = cfg->output.directory;
  } else {
    dir = "out";
  }
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json manifest_base(const RunConfig& cfg, const std::string& command) {
  json m;
  m["command"] = command;
  m["version"] = CHIRAL_VERSION;
  m["config_sha256"] = sha256_hex(cfg.text);
  m["frequency_hz"] = cfg.frequency;
  return m;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double degrees(double rad) { return rad * 180.0 / std::numbers::pi; }

// ---------------------------------------------------------------- slab

int cmd_slab(const Options& opt, const CLI::App& app) {
  slab::LayerStack stack;
  std::optional<SlabSweep> sweep;
  std::optional<RunConfig> cfg;
  if (!opt.config.empty()) {
    cfg = load_config(opt.config);
    if (!cfg->slab) throw ConfigError("slab: missing");
    stack = cfg->slab->stack;
    sweep = cfg->slab->sweep;
  } else {
    stack.frequency = 2.45e9;
  }
  if (app.count("--thickness-mm") || !cfg) {
    if (!(opt.thickness_mm > 0.0)) throw ConfigError("--thickness-mm: must be positive");
    if (!(opt.eps_r > 0.0)) throw ConfigError("--eps-r: must be positive");
    if (opt.sigma < 0.0) throw ConfigError("--sigma: must be non-negative");
    BiIsotropicMaterial m;
    m.eps_r = opt.eps_r;
    m.sigma = opt.sigma;
    m.kappa = opt.kappa;
    stack.layers = {{m, opt.thickness_mm * 1e-3}};
  }

  const auto report = [&](const slab::LayerStack& s) {
    return slab::polarimetry(slab::stack_jones(s).transmission, slab::rotation_hint(s));
  };
  const slab::Polarimetry p = report(stack);
  std::printf("rotation_deg     %.6f\n", degrees(p.rotation));
  std::printf("ellipticity_deg  %.6f\n", degrees(p.ellipticity));
  std::printf("co_power         %.6f\n", p.co_power);
  std::printf("cross_power      %.6f\n", p.cross_power);

  if (sweep) {
    const fs::path dir = output_dir(opt, cfg ? &*cfg : nullptr);
    std::ofstream csv(dir / "slab_sweep.csv");
    csv << "thickness_mm,rotation_deg,ellipticity_deg,co_power,cross_power\n";
    for (int i = 0; i < sweep->steps; ++i) {
      const double d = sweep->steps == 1 ? sweep->from
                                         : sweep->from + (sweep->to - sweep->from) * i / (sweep->steps - 1);
      slab::LayerStack s = stack;
      s.layers[static_cast<std::size_t>(sweep->layer)].thickness = d;
      const slab::Polarimetry q = report(s);
      char line[160];
      std::snprintf(line, sizeof line, "%.6f,%.9f,%.9f,%.12f,%.12f\n", d * 1e3, degrees(q.rotation),
                    degrees(q.ellipticity), q.co_power, q.cross_power);
      csv << line;
    }
    if (opt.verbose) std::cerr << "wrote " << (dir / "slab_sweep.csv").string() << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------- solve

int cmd_solve(const Options& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig cfg = load_config(opt.config);
  if (!cfg.scene) throw ConfigError("scene: missing");
  if (!cfg.source) throw ConfigError("source: missing");
  const GridSpec gs = cfg.grid_spec();
  const fs::path dir = output_dir(opt, &cfg);

  const auto status = check_resolution(gs.cell_size, cfg.scene->materials(), cfg.frequency);
  if (status == ResolutionStatus::coarse) std::cerr << "warning: cell size coarser than a tenth of the shortest wavelength\n";
  const MaterialGrid grid = voxelize(*cfg.scene, gs, cfg.full_wave.supersample);
  const LinearOperator op = assemble(grid, cfg.frequency, gs, cfg.full_wave.assembly);
  if (opt.verbose) std::cerr << "unknowns " << op.layout.edge_total() << ", nonzeros " << op.matrix.nonZeros() << '\n';
  const FieldSolver solver(op, cfg.full_wave.solver);
  const FieldSolution sol = solver.solve(source_vector(op, grid, cfg.source->source));

  static const char* kMethods[] = {"direct", "cocg", "bicgstab"};
  std::printf("unknowns    %lld\n", static_cast<long long>(op.layout.edge_total()));
  std::printf("method      %s\n", kMethods[static_cast<int>(solver.method())]);
  std::printf("iterations  %d\n", sol.iterations);
  std::printf("residual    %.3e\n", sol.residual);
  json m = manifest_base(cfg, "solve");
  m["unknowns"] = op.layout.edge_total();
  m["method"] = kMethods[static_cast<int>(solver.method())];
  m["iterations"] = sol.iterations;
  m["residual"] = sol.residual;
  if (cfg.source->probe) {
    const cplx a = port_overlap(sol, *cfg.source->probe);
    std::printf("probe       %.9e %+.9ej  |a|^2 %.6e (%.2f dB)\n", a.real(), a.imag(), std::norm(a),
                to_db(std::norm(a)));
    m["probe"] = {{"re", a.real()}, {"im", a.imag()}, {"power", std::norm(a)}};
  }
  if (cfg.output.field_dump) {
    write_field_snapshot(dir / "field.bin", sol);
    m["field"] = "field.bin";
  }
  m["wall_seconds"] = seconds_since(t0);
  write_json(dir / "solve_manifest.json", m);
  return kOk;
}

// ---------------------------------------------------------------- scan

int cmd_scan(const Options& opt, const CLI::App& app) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig cfg = load_config(opt.config);
  if (!cfg.scene) throw ConfigError("scene: missing");
  if (!cfg.scan) throw ConfigError("scan: missing");
  ScanConfig sc = *cfg.scan;
  Engine engine = cfg.engine;
  if (app.count("--engine")) engine = engine_from_string(opt.engine);
  if (app.count("--jobs")) {
    if (opt.jobs < 1) throw ConfigError("--jobs: must be positive");
    sc.jobs = opt.jobs;
  }
  GridSpec gs;
  if (engine == Engine::full_wave) gs = cfg.grid_spec();
  const fs::path dir = output_dir(opt, &cfg);

  ScanProgress progress;
  if (opt.verbose) progress = [](int done, int total) { std::cerr << "cell " << done << '/' << total << '\n'; };
  json m = manifest_base(cfg, "scan");
  m["engine"] = to_string(engine);
  m["jobs"] = sc.jobs;
  m["cells"] = {sc.columns, sc.rows};
  ScanMap map;
  try {
    map = run_scan(*cfg.scene, sc, engine, gs, cfg.full_wave, progress);
  } catch (const ScanAbortedError&) {
    m["status"] = "aborted";
    m["wall_seconds"] = seconds_since(t0);
    write_json(dir / "manifest.json", m);
    throw;
  }

  const MapTable linear = to_table(map, false);
  write_map_csv(dir / "map.csv", linear);
  write_map_csv(dir / "map_db.csv", to_table(map, true));
  std::ofstream(dir / "map.pgm") << render_pgm(linear, cfg.output.render_scale);

  Eigen::Index r = 0, c = 0;
  const double peak = map.power().maxCoeff(&r, &c);
  std::printf("cells     %d x %d (%s engine)\n", sc.columns, sc.rows, to_string(engine).c_str());
  std::printf("peak      %.2f dB at x = %.1f mm, z = %.1f mm\n", to_db(peak), map.x_centers[static_cast<std::size_t>(c)] * 1e3,
              map.z_centers[static_cast<std::size_t>(r)] * 1e3);
  std::printf("failures  %d\n", map.failures());

  m["status"] = "ok";
  m["failures"] = map.failures();
  m["outputs"] = {"map.csv", "map_db.csv", "map.pgm"};
  json cells = json::array();
  for (int row = 0; row < sc.rows; ++row) {
    for (int col = 0; col < sc.columns; ++col) {
      const auto& d = map.diagnostics[static_cast<std::size_t>(row * sc.columns + col)];
      json cell = {{"x_mm", map.x_centers[static_cast<std::size_t>(col)] * 1e3},
                   {"z_mm", map.z_centers[static_cast<std::size_t>(row)] * 1e3},
                   {"ok", d.ok},
                   {"seconds", d.seconds}};
      if (engine == Engine::full_wave) {
        cell["residual"] = d.residual;
        cell["iterations"] = d.iterations;
      }
      if (!d.ok) cell["error"] = d.error;
      cells.push_back(cell);
    }
  }
  m["diagnostics"] = cells;
  m["wall_seconds"] = seconds_since(t0);
  write_json(dir / "manifest.json", m);
  return kOk;
}

// ---------------------------------------------------------------- render

int cmd_render(const Options& opt) {
  const MapTable t = read_map_csv(opt.map);
  fs::path image = opt.image;
  if (image.empty()) {
    image = fs::path(opt.map).replace_extension(".pgm");
    if (!opt.out.empty() || std::getenv("CHIRAL_OUT_DIR")) image = output_dir(opt, nullptr) / image.filename();
  }
  const std::string pgm = render_pgm(t, opt.scale > 0 ? opt.scale : 16);
  std::ofstream out(image);
  if (!out) throw std::runtime_error("cannot write " + image.string());
  out << pgm;
  if (opt.verbose) std::cerr << "wrote " << image.string() << '\n';
  return kOk;
}

// ---------------------------------------------------------------- validate

int cmd_validate(const Options& opt) {
  const RunConfig cfg = load_config(opt.config);
  std::printf("config ok: %s\n", opt.config.c_str());
  std::printf("  materials %zu, scene %s, grid %s, scan %s, source %s, slab %s\n", cfg.materials.size(),
              cfg.scene ? "yes" : "no", cfg.grid ? "yes" : "no", cfg.scan ? "yes" : "no", cfg.source ? "yes" : "no",
              cfg.slab ? "yes" : "no");
  if (cfg.scene && cfg.grid) {
    const GridSpec gs = cfg.grid_spec();
    const auto n = gs.total_cells();
    std::printf("  grid %d x %d x %d cells including absorbers\n", n[0], n[1], n[2]);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bi-isotropic media solver and cross-polarization scanner"};
  app.require_subcommand(1);
  Options opt;
  app.set_version_flag("--version", CHIRAL_VERSION);

  auto common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", opt.config, "configuration document (JSON)");
    if (needs_config) c->required();
    sub->add_option("--out", opt.out, "output directory (overrides CHIRAL_OUT_DIR and output.directory)");
    sub->add_flag("--verbose", opt.verbose, "progress on stderr");
  };

  auto* slab_cmd = app.add_subcommand("slab", "polarimetry of a layered slab");
  common(slab_cmd, false);
  slab_cmd->add_option("--kappa", opt.kappa, "single-layer chirality");
  slab_cmd->add_option("--eps-r", opt.eps_r, "single-layer relative permittivity");
  slab_cmd->add_option("--sigma", opt.sigma, "single-layer conductivity (S/m)");
  slab_cmd->add_option("--thickness-mm", opt.thickness_mm, "single-layer thickness");

  auto* solve_cmd = app.add_subcommand("solve", "one full-wave solve with field dump");
  common(solve_cmd, true);

  auto* scan_cmd = app.add_subcommand("scan", "cross-polarization map");
  common(scan_cmd, true);
  scan_cmd->add_option("--engine", opt.engine, "full or tube")->check(CLI::IsMember({"full", "tube"}));
  scan_cmd->add_option("--jobs", opt.jobs, "worker threads");

  auto* render_cmd = app.add_subcommand("render", "graymap of a map CSV");
  render_cmd->add_option("--map", opt.map, "linear-power map CSV")->required();
  render_cmd->add_option("--scale", opt.scale, "pixels per cell (default 16)");
  render_cmd->add_option("--image", opt.image, "output image path");
  render_cmd->add_option("--out", opt.out, "output directory");
  render_cmd->add_flag("--verbose", opt.verbose, "report the written file");

  auto* validate_cmd = app.add_subcommand("validate", "schema check only");
  common(validate_cmd, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (slab_cmd->parsed()) return cmd_slab(opt, *slab_cmd);
    if (solve_cmd->parsed()) return cmd_solve(opt);
    if (scan_cmd->parsed()) return cmd_scan(opt, *scan_cmd);
    if (render_cmd->parsed()) return cmd_render(opt);
    if (validate_cmd->parsed()) return cmd_validate(opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ScanAbortedError& e) {
    std::cerr << e.what() << '\n';
    return kAborted;
  } catch (const PhysicsError& e) {
    std::cerr << "physics error: " << e.what() << '\n';
    return kPhysics;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
