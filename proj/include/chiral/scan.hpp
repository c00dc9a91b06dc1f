#pragma once

#include <chiral/phantom.hpp>
#include <chiral/solver3d.hpp>

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace chiral {

enum class Engine { full_wave, tube };

std::string to_string(Engine e);
Engine engine_from_string(const std::string& name);  // "full" or "tube"

/// Cross-polarized aperture pair swept over the x-z plane; propagation along +y.
struct ScanConfig {
  int columns = 12;  // along x
  int rows = 12;     // along z
  double pitch = 0.020;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();  // (x, z) of the grid centre
  Eigen::Vector3d tx_polarization = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d rx_polarization = Eigen::Vector3d::UnitX();
  double aperture_across = 14.752e-3;
  double aperture_along = 9.752e-3;
  double standoff = 0.020;  // aperture planes sit this far inside the y faces of the domain

  int tube_rays = 5;               // per aperture side
  double tube_cell_size = 0.5e-3;  // voxel size of the ray integration

  int jobs = 1;
  double abort_fraction = 0.25;
};

/// Throws ConfigError on non-orthogonal polarizations or a grid that leaves the domain.
void validate(const ScanConfig& cfg, const Scene& scene);

/// (x, 0, z) centre of scan cell (col, row); row 0 is the lowest z.
Eigen::Vector3d scan_cell_center(const ScanConfig& cfg, int col, int row);

/// y coordinates of the transmitting and receiving aperture planes.
std::pair<double, double> aperture_planes(const ScanConfig& cfg, const Scene& scene);

ApertureSpec tx_aperture(const ScanConfig& cfg, const Scene& scene, int col, int row);
ApertureSpec rx_aperture(const ScanConfig& cfg, const Scene& scene, int col, int row);

struct TubeRay {
  double rotation = 0.0;     // rad, sum of alpha_tilde dl
  double attenuation = 0.0;  // Np, sum of alpha_att dl
};

/// Integrates one ray from the tx to the rx plane, sampling the material at the
/// midpoint of each cfg.tube_cell_size step along y.
TubeRay trace_tube_ray(const Scene& scene, const ScanConfig& cfg, double x, double z);

/// Cross-polarized power fraction of one cell: mean over the ray bundle of
/// sin^2(phi) exp(-2A), divided by the mean of exp(-2A) in the empty scene.
double tube_estimate(const Scene& scene, const ScanConfig& cfg, int col, int row);

struct CellDiagnostics {
  bool ok = true;
  double residual = 0.0;
  int iterations = 0;
  double seconds = 0.0;
  std::string error;
};

struct ScanMap {
  Engine engine = Engine::tube;
  Eigen::MatrixXcd values;  // (row, col): calibrated cross-pol amplitude
  std::vector<double> x_centers;
  std::vector<double> z_centers;
  std::vector<CellDiagnostics> diagnostics;  // row-major

  Eigen::MatrixXd power() const { return values.cwiseAbs2(); }
  int failures() const;
};

struct FullWaveOptions {
  AssemblyOptions assembly;
  SolverOptions solver;
  int supersample = 2;
};

using ScanProgress = std::function<void(int done, int total)>;

/// Evaluates every cell; failed cells carry a diagnostic and zero value. Throws
/// ScanAbortedError once failures reach cfg.abort_fraction of the cells.
ScanMap run_scan(const Scene& scene, const ScanConfig& cfg, Engine engine, const GridSpec& gs,
                 const FullWaveOptions& fw = {}, const ScanProgress& progress = {});

}  // namespace chiral
