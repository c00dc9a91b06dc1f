#pragma once

#include <chiral/media.hpp>

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace chiral {

enum class Boundary { absorbing, periodic, conductor };

std::string to_string(Boundary b);
Boundary boundary_from_string(const std::string& name);

/// Uniform Cartesian grid. `extents` counts the cells of the physical domain;
/// absorbing axes are padded on both sides with `absorber_thickness` cells of
/// stretched coordinates, and every non-periodic axis ends on a perfect conductor.
struct GridSpec {
  double cell_size = 1e-3;  // m
  std::array<int, 3> extents{1, 1, 1};
  std::array<Boundary, 3> boundary{Boundary::absorbing, Boundary::absorbing, Boundary::absorbing};
  int absorber_thickness = 10;

  int padding(int axis) const { return boundary[axis] == Boundary::absorbing ? absorber_thickness : 0; }
  int total_cells(int axis) const { return extents[axis] + 2 * padding(axis); }
  std::array<int, 3> total_cells() const { return {total_cells(0), total_cells(1), total_cells(2)}; }
  std::int64_t cell_count() const;

  /// The physical domain is centred on the origin.
  Eigen::Vector3d origin() const;
  Eigen::Vector3d domain_size() const;
};

/// Throws GeometryError on malformed specs (non-positive sizes, thin absorbers).
void validate(const GridSpec& gs);

/// GridSpec whose extents cover `domain_size` (rounded to whole cells).
GridSpec make_grid_spec(const Eigen::Vector3d& domain_size, double cell_size,
                        std::array<Boundary, 3> boundary = {Boundary::absorbing, Boundary::absorbing,
                                                            Boundary::absorbing},
                        int absorber_thickness = 10);

enum class ResolutionStatus { ok, coarse };

/// Cells must resolve the shortest wavelength: finer than lambda/10 is ok,
/// up to lambda/5 is reported as coarse, anything coarser throws ResolutionError.
ResolutionStatus check_resolution(double cell_size, const std::vector<BiIsotropicMaterial>& materials,
                                  double frequency);

/// Voxelized scene: one material index per cell (x fastest) into a compact table.
struct MaterialGrid {
  std::vector<BiIsotropicMaterial> table;
  std::vector<std::uint16_t> index;
  std::array<int, 3> counts{0, 0, 0};
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  double cell_size = 0.0;

  std::int64_t linear(int i, int j, int k) const {
    return i + static_cast<std::int64_t>(counts[0]) * (j + static_cast<std::int64_t>(counts[1]) * k);
  }
  const BiIsotropicMaterial& at(int i, int j, int k) const { return table[index[linear(i, j, k)]]; }
  std::uint16_t material_index(int i, int j, int k) const { return index[linear(i, j, k)]; }
  Eigen::Vector3d cell_center(int i, int j, int k) const {
    return origin + cell_size * Eigen::Vector3d(i + 0.5, j + 0.5, k + 0.5);
  }
  std::int64_t size() const { return static_cast<std::int64_t>(index.size()); }
};

}  // namespace chiral
