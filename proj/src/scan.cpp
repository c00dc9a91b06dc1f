#include <chiral/scan.hpp>

#include <chiral/errors.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <thread>

namespace chiral {

std::string to_string(Engine e) { return e == Engine::tube ? "tube" : "full"; }

Engine engine_from_string(const std::string& name) {
  if (name == "tube") return Engine::tube;
  if (name == "full") return Engine::full_wave;
  throw ConfigError("unknown engine '" + name + "' (expected full or tube)");
}

int ScanMap::failures() const {
  int n = 0;
  for (const auto& d : diagnostics) n += d.ok ? 0 : 1;
  return n;
}

namespace {

Eigen::Vector3d across_direction(const ScanConfig& cfg) {
  return Eigen::Vector3d::UnitY().cross(cfg.tx_polarization.normalized());
}

// Runs fn(i) for i in [0, n) on `jobs` threads; stops handing out work once stop() is true.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn, const std::function<bool()>& stop) {
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n && !stop(); i = next++) fn(i);
  };
  const int threads = std::max(1, std::min(jobs, n));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

}  // namespace

void validate(const ScanConfig& cfg, const Scene& scene) {
  if (cfg.columns < 1 || cfg.rows < 1) throw ConfigError("scan.cells must be positive");
  if (!(cfg.pitch > 0.0)) throw ConfigError("scan.pitch must be positive");
  for (const auto* p : {&cfg.tx_polarization, &cfg.rx_polarization}) {
    if (!(p->norm() > 0.0)) throw ConfigError("scan polarizations must be non-zero");
    if (std::abs(p->normalized().y()) > 1e-9) throw ConfigError("scan polarizations must lie in the x-z plane");
  }
  if (std::abs(cfg.tx_polarization.normalized().dot(cfg.rx_polarization.normalized())) > 1e-9) {
    throw ConfigError("tx and rx polarizations must be orthogonal");
  }
  if (!(cfg.aperture_across > 0.0) || !(cfg.aperture_along > 0.0)) throw ConfigError("aperture size must be positive");
  const Eigen::Vector3d half = 0.5 * scene.domain_size;
  if (!(cfg.standoff > 0.0) || cfg.standoff >= half.y()) throw ConfigError("scan.standoff must lie inside the domain");
  const double sx = 0.5 * cfg.columns * cfg.pitch;
  const double sz = 0.5 * cfg.rows * cfg.pitch;
  const double slack = 1e-9;
  if (std::abs(cfg.center.x()) + sx > half.x() + slack || std::abs(cfg.center.y()) + sz > half.z() + slack) {
    throw ConfigError("scan grid extends beyond the domain cross-section");
  }
  // apertures of the outermost cells must stay inside the domain too
  const Eigen::Vector3d p = cfg.tx_polarization.normalized();
  const Eigen::Vector3d q = across_direction(cfg);
  const Eigen::Vector3d reach = (0.5 * cfg.aperture_along * p).cwiseAbs() + (0.5 * cfg.aperture_across * q).cwiseAbs();
  for (int corner = 0; corner < 4; ++corner) {
    const Eigen::Vector3d c = scan_cell_center(cfg, corner & 1 ? cfg.columns - 1 : 0, corner & 2 ? cfg.rows - 1 : 0);
    if (std::abs(c.x()) + reach.x() > half.x() + slack || std::abs(c.z()) + reach.z() > half.z() + slack) {
      throw ConfigError("scan apertures extend beyond the domain cross-section");
    }
  }
  if (cfg.tube_rays < 1) throw ConfigError("scan.tube_rays must be positive");
  if (!(cfg.tube_cell_size > 0.0)) throw ConfigError("scan.tube_cell_size must be positive");
  if (cfg.jobs < 1) throw ConfigError("jobs must be positive");
  if (!(cfg.abort_fraction > 0.0 && cfg.abort_fraction <= 1.0)) throw ConfigError("abort fraction must lie in (0, 1]");
}

Eigen::Vector3d scan_cell_center(const ScanConfig& cfg, int col, int row) {
  return {cfg.center.x() + (col - 0.5 * (cfg.columns - 1)) * cfg.pitch, 0.0,
          cfg.center.y() + (row - 0.5 * (cfg.rows - 1)) * cfg.pitch};
}

std::pair<double, double> aperture_planes(const ScanConfig& cfg, const Scene& scene) {
  const double half = 0.5 * scene.domain_size.y();
  return {-half + cfg.standoff, half - cfg.standoff};
}

ApertureSpec tx_aperture(const ScanConfig& cfg, const Scene& scene, int col, int row) {
  ApertureSpec ap;
  ap.center = scan_cell_center(cfg, col, row);
  ap.center.y() = aperture_planes(cfg, scene).first;
  ap.normal_axis = 1;
  ap.polarization = cfg.tx_polarization.normalized();
  ap.size_across = cfg.aperture_across;
  ap.size_along = cfg.aperture_along;
  return ap;
}

ApertureSpec rx_aperture(const ScanConfig& cfg, const Scene& scene, int col, int row) {
  // same footprint as the transmitter, rotated into the rx polarization
  ApertureSpec ap = tx_aperture(cfg, scene, col, row);
  ap.center.y() = aperture_planes(cfg, scene).second;
  ap.polarization = cfg.rx_polarization.normalized();
  std::swap(ap.size_across, ap.size_along);
  return ap;
}

// ---------------------------------------------------------------- tube engine

TubeRay trace_tube_ray(const Scene& scene, const ScanConfig& cfg, double x, double z) {
  const double h = cfg.tube_cell_size;
  const Eigen::Vector3d origin = -0.5 * scene.domain_size;
  const auto [y0, y1] = aperture_planes(cfg, scene);

  std::vector<const BiIsotropicMaterial*> seen;
  std::vector<WaveConstants> constants;
  TubeRay ray;
  const int first = static_cast<int>(std::floor((y0 - origin.y()) / h));
  const int last = static_cast<int>(std::floor((y1 - origin.y()) / h));
  for (int j = first; j <= last; ++j) {
    const double lo = std::max(y0, origin.y() + j * h);
    const double hi = std::min(y1, origin.y() + (j + 1) * h);
    if (hi <= lo) continue;
    const BiIsotropicMaterial& m = material_at(scene, {x, origin.y() + (j + 0.5) * h, z});
    std::size_t slot = 0;
    while (slot < seen.size() && seen[slot] != &m) ++slot;
    if (slot == seen.size()) {
      seen.push_back(&m);
      constants.push_back(wave_constants(m, scene.frequency));
    }
    ray.rotation += constants[slot].alpha_tilde * (hi - lo);
    ray.attenuation += constants[slot].attenuation() * (hi - lo);
  }
  return ray;
}

double tube_estimate(const Scene& scene, const ScanConfig& cfg, int col, int row) {
  if (col < 0 || col >= cfg.columns || row < 0 || row >= cfg.rows) throw GeometryError("scan cell out of range");
  const Eigen::Vector3d c = scan_cell_center(cfg, col, row);
  const Eigen::Vector3d p = cfg.tx_polarization.normalized();
  const Eigen::Vector3d q = across_direction(cfg);
  const Scene empty = scene.empty();
  const int n = cfg.tube_rays;
  double cross = 0.0;
  double reference = 0.0;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const Eigen::Vector3d r =
          c + ((a + 0.5) / n - 0.5) * cfg.aperture_along * p + ((b + 0.5) / n - 0.5) * cfg.aperture_across * q;
      const TubeRay ray = trace_tube_ray(scene, cfg, r.x(), r.z());
      const double s = std::sin(ray.rotation);
      cross += s * s * std::exp(-2.0 * ray.attenuation);
      reference += std::exp(-2.0 * trace_tube_ray(empty, cfg, r.x(), r.z()).attenuation);
    }
  }
  return cross / reference;
}

// ---------------------------------------------------------------- scan driver

namespace {

struct FullWaveContext {
  MaterialGrid grid;
  LinearOperator op;
  MaterialGrid empty_grid;
  LinearOperator empty_op;
  std::unique_ptr<FieldSolver> solver;
  std::unique_ptr<FieldSolver> empty_solver;
};

// The empty scene is mirror-symmetric about x = 0 and z = 0, so the reference
// overlap only depends on |x| and |z| of the cell.
std::pair<long, long> reference_key(const Eigen::Vector3d& c) {
  return {std::lround(std::abs(c.x()) * 1e7), std::lround(std::abs(c.z()) * 1e7)};
}

}  // namespace

ScanMap run_scan(const Scene& scene, const ScanConfig& cfg, Engine engine, const GridSpec& gs,
                 const FullWaveOptions& fw, const ScanProgress& progress) {
  validate(scene);
  validate(cfg, scene);
  const int total = cfg.columns * cfg.rows;
  ScanMap map;
  map.engine = engine;
  map.values = Eigen::MatrixXcd::Zero(cfg.rows, cfg.columns);
  map.diagnostics.assign(static_cast<std::size_t>(total), {});
  for (int i = 0; i < cfg.columns; ++i) map.x_centers.push_back(scan_cell_center(cfg, i, 0).x());
  for (int j = 0; j < cfg.rows; ++j) map.z_centers.push_back(scan_cell_center(cfg, 0, j).z());

  const int allowed = static_cast<int>(std::ceil(cfg.abort_fraction * total));
  std::atomic<int> failures{0};
  std::atomic<int> done{0};
  std::mutex progress_mutex;
  auto stop = [&] { return failures.load() >= allowed; };
  auto report = [&] {
    const int d = ++done;
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(d, total);
    }
  };
  auto fail = [&](int cell, const std::string& what) {
    auto& diag = map.diagnostics[static_cast<std::size_t>(cell)];
    diag.ok = false;
    diag.error = what;
    ++failures;
  };

  if (engine == Engine::tube) {
    parallel_for(
        total, cfg.jobs,
        [&](int cell) {
          const int row = cell / cfg.columns, col = cell % cfg.columns;
          const auto t0 = std::chrono::steady_clock::now();
          try {
            map.values(row, col) = std::sqrt(tube_estimate(scene, cfg, col, row));
          } catch (const PhysicsError& e) {
            fail(cell, e.what());
          }
          map.diagnostics[static_cast<std::size_t>(cell)].seconds =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          report();
        },
        stop);
  } else {
    check_resolution(gs.cell_size, scene.materials(), scene.frequency);
    if (((gs.domain_size() - scene.domain_size).array().abs() > 0.5 * gs.cell_size).any()) {
      throw GeometryError("grid domain does not match the scene domain");
    }
    FullWaveContext ctx;
    ctx.grid = voxelize(scene, gs, fw.supersample);
    ctx.op = assemble(ctx.grid, scene.frequency, gs, fw.assembly);
    ctx.empty_grid = voxelize(scene.empty(), gs, 1);
    ctx.empty_op = assemble(ctx.empty_grid, scene.frequency, gs, fw.assembly);
    ctx.solver = std::make_unique<FieldSolver>(ctx.op, fw.solver);
    ctx.empty_solver = std::make_unique<FieldSolver>(ctx.empty_op, fw.solver);

    // empty-scene co-polarized overlap at the receiver, one solve per mirror class
    std::map<std::pair<long, long>, int> key_index;
    std::vector<int> key_cell;
    for (int cell = 0; cell < total; ++cell) {
      const auto key = reference_key(scan_cell_center(cfg, cell % cfg.columns, cell / cfg.columns));
      if (key_index.emplace(key, static_cast<int>(key_cell.size())).second) key_cell.push_back(cell);
    }
    std::vector<cplx> reference(key_cell.size());
    std::vector<std::string> reference_error(key_cell.size());
    parallel_for(
        static_cast<int>(key_cell.size()), cfg.jobs,
        [&](int k) {
          const int cell = key_cell[static_cast<std::size_t>(k)];
          const int row = cell / cfg.columns, col = cell % cfg.columns;
          try {
            SourceSpec src;
            src.aperture = tx_aperture(cfg, scene, col, row);
            const FieldSolution sol =
                ctx.empty_solver->solve(source_vector(ctx.empty_op, ctx.empty_grid, src));
            ApertureSpec rx = rx_aperture(cfg, scene, col, row);
            rx.polarization = src.aperture.polarization;
            std::swap(rx.size_across, rx.size_along);
            reference[static_cast<std::size_t>(k)] = port_overlap(sol, rx);
            if (std::abs(reference[static_cast<std::size_t>(k)]) == 0.0) {
              reference_error[static_cast<std::size_t>(k)] = "empty-scene reference overlap is zero";
            }
          } catch (const PhysicsError& e) {
            reference_error[static_cast<std::size_t>(k)] = std::string("reference run failed: ") + e.what();
          }
        },
        [] { return false; });

    parallel_for(
        total, cfg.jobs,
        [&](int cell) {
          const int row = cell / cfg.columns, col = cell % cfg.columns;
          const auto t0 = std::chrono::steady_clock::now();
          auto& diag = map.diagnostics[static_cast<std::size_t>(cell)];
          const int k = key_index.at(reference_key(scan_cell_center(cfg, col, row)));
          if (!reference_error[static_cast<std::size_t>(k)].empty()) {
            fail(cell, reference_error[static_cast<std::size_t>(k)]);
          } else {
            try {
              SourceSpec src;
              src.aperture = tx_aperture(cfg, scene, col, row);
              const FieldSolution sol = ctx.solver->solve(source_vector(ctx.op, ctx.grid, src));
              diag.residual = sol.residual;
              diag.iterations = sol.iterations;
              map.values(row, col) =
                  port_overlap(sol, rx_aperture(cfg, scene, col, row)) / reference[static_cast<std::size_t>(k)];
            } catch (const PhysicsError& e) {
              fail(cell, e.what());
            }
          }
          diag.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          report();
        },
        stop);
  }

  if (failures.load() >= allowed) {
    throw ScanAbortedError("scan aborted: " + std::to_string(failures.load()) + " of " + std::to_string(total) +
                           " cells failed");
  }
  return map;
}

}  // namespace chiral
