#pragma once

#include <chiral/grid.hpp>
#include <chiral/media.hpp>

#include <Eigen/Dense>

#include <string>
#include <variant>
#include <vector>

namespace chiral {

struct Ellipsoid {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d semiaxes = Eigen::Vector3d::Ones();
  Eigen::Vector3d euler = Eigen::Vector3d::Zero();  // rad, body -> world R = Rz Ry Rx

  Eigen::Matrix3d rotation() const;
  bool contains(const Eigen::Vector3d& p) const;
  double volume() const;
};

struct Box {
  Eigen::Vector3d corner = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Ones();

  bool contains(const Eigen::Vector3d& p) const;
  double volume() const;
};

using Shape = std::variant<Ellipsoid, Box>;

bool contains(const Shape& shape, const Eigen::Vector3d& p);
/// Axis-aligned bounding box as (min, max).
std::pair<Eigen::Vector3d, Eigen::Vector3d> bounds(const Shape& shape);

struct SceneShape {
  Shape shape;
  BiIsotropicMaterial material;
  std::string name;
};

/// Declarative scene centred on the origin. Later shapes paint over earlier ones.
struct Scene {
  BiIsotropicMaterial background;
  std::vector<SceneShape> shapes;
  Eigen::Vector3d domain_size = Eigen::Vector3d::Constant(0.1);
  double frequency = 2.45e9;

  /// Background plus every shape material, in painter's order.
  std::vector<BiIsotropicMaterial> materials() const;
  /// The same domain with the shapes removed (calibration reference).
  Scene empty() const;
};

/// Throws GeometryError if a shape leaves the domain, InvalidMaterialError on bad materials.
void validate(const Scene& scene);

/// Homogenized head in a matching-medium box with an ellipsoidal chiral inclusion.
/// Semiaxes are given as (x, y, z) with y the propagation axis of the scan.
struct PhantomParams {
  double frequency = 2.45e9;
  Eigen::Vector3d domain_size{0.280, 0.300, 0.280};
  BiIsotropicMaterial matching{53.0, 0.0, 1.0, 0.0, 0.0};
  BiIsotropicMaterial head{53.0, 1.1, 1.0, 0.0, 0.0};
  Eigen::Vector3d head_center = Eigen::Vector3d::Zero();
  Eigen::Vector3d head_semiaxes{0.090, 0.115, 0.100};
  BiIsotropicMaterial inclusion{53.0, 1.1, 1.0, 0.5, 0.0};
  Eigen::Vector3d inclusion_offset = Eigen::Vector3d::Zero();  // from head centre
  Eigen::Vector3d inclusion_semiaxes{0.020, 0.030, 0.010};
  Eigen::Vector3d inclusion_euler = Eigen::Vector3d::Zero();

  /// Full-size head phantom.
  static PhantomParams full_size();
  /// 80 mm desk-scale stand-in: eps_r = 10 medium, 30 mm head sphere, 15x10x5 mm inclusion.
  static PhantomParams mini();
};

/// Material of the last shape containing p, else the background.
const BiIsotropicMaterial& material_at(const Scene& scene, const Eigen::Vector3d& p);

Scene build_head_scene(const PhantomParams& p);

/// Assigns every cell of the padded grid to a material. supersample = 1 tests the
/// cell centroid; supersample = 2 takes the majority of 8 sub-cell centroids,
/// falling back to the centroid on ties.
MaterialGrid voxelize(const Scene& scene, const GridSpec& gs, int supersample = 1);

}  // namespace chiral
