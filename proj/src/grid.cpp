#include <chiral/grid.hpp>

#include <chiral/errors.hpp>

#include <cmath>
#include <numbers>

namespace chiral {

std::string to_string(Boundary b) {
  switch (b) {
    case Boundary::absorbing: return "absorbing";
    case Boundary::periodic: return "periodic";
    case Boundary::conductor: return "conductor";
  }
  return "?";
}

Boundary boundary_from_string(const std::string& name) {
  if (name == "absorbing") return Boundary::absorbing;
  if (name == "periodic") return Boundary::periodic;
  if (name == "conductor") return Boundary::conductor;
  throw ConfigError("unknown boundary '" + name + "' (expected absorbing, periodic or conductor)");
}

std::int64_t GridSpec::cell_count() const {
  return static_cast<std::int64_t>(total_cells(0)) * total_cells(1) * total_cells(2);
}

Eigen::Vector3d GridSpec::origin() const {
  Eigen::Vector3d o;
  for (int a = 0; a < 3; ++a) o[a] = -cell_size * (0.5 * extents[a] + padding(a));
  return o;
}

Eigen::Vector3d GridSpec::domain_size() const {
  return cell_size * Eigen::Vector3d(extents[0], extents[1], extents[2]);
}

void validate(const GridSpec& gs) {
  if (!(gs.cell_size > 0.0) || !std::isfinite(gs.cell_size)) throw GeometryError("cell size must be positive");
  for (int a = 0; a < 3; ++a) {
    if (gs.extents[a] < 1) throw GeometryError("grid extents must be >= 1 cell on every axis");
    if (gs.boundary[a] == Boundary::absorbing && gs.absorber_thickness < 8) {
      throw GeometryError("absorbing layers need at least 8 cells");
    }
    if (gs.boundary[a] == Boundary::conductor && gs.extents[a] < 2) {
      throw GeometryError("conductor-bounded axes need at least 2 cells");
    }
  }
}

GridSpec make_grid_spec(const Eigen::Vector3d& domain_size, double cell_size, std::array<Boundary, 3> boundary,
                        int absorber_thickness) {
  GridSpec gs;
  gs.cell_size = cell_size;
  gs.boundary = boundary;
  gs.absorber_thickness = absorber_thickness;
  for (int a = 0; a < 3; ++a) gs.extents[a] = std::max(1, static_cast<int>(std::lround(domain_size[a] / cell_size)));
  validate(gs);
  return gs;
}

ResolutionStatus check_resolution(double cell_size, const std::vector<BiIsotropicMaterial>& materials,
                                  double frequency) {
  double k_max = free_space_wavenumber(frequency);
  for (const auto& m : materials) k_max = std::max(k_max, max_wavenumber(m, frequency));
  const double lambda_min = 2.0 * std::numbers::pi / k_max;
  if (cell_size > lambda_min / 5.0) {
    throw ResolutionError("cell size " + std::to_string(cell_size * 1e3) + " mm exceeds lambda/5 (lambda_min = " +
                          std::to_string(lambda_min * 1e3) + " mm)");
  }
  return cell_size > lambda_min / 10.0 ? ResolutionStatus::coarse : ResolutionStatus::ok;
}

}  // namespace chiral
