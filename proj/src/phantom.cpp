#include <chiral/phantom.hpp>

#include <chiral/errors.hpp>

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace chiral {

Eigen::Matrix3d Ellipsoid::rotation() const {
  using Eigen::AngleAxisd;
  return (AngleAxisd(euler.z(), Eigen::Vector3d::UnitZ()) * AngleAxisd(euler.y(), Eigen::Vector3d::UnitY()) *
          AngleAxisd(euler.x(), Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

bool Ellipsoid::contains(const Eigen::Vector3d& p) const {
  const Eigen::Vector3d q = rotation().transpose() * (p - center);
  return (q.array() / semiaxes.array()).square().sum() <= 1.0;
}

double Ellipsoid::volume() const { return 4.0 / 3.0 * std::numbers::pi * semiaxes.prod(); }

bool Box::contains(const Eigen::Vector3d& p) const {
  return ((p - corner).array() >= 0.0).all() && ((p - corner - size).array() <= 0.0).all();
}

double Box::volume() const { return size.prod(); }

bool contains(const Shape& shape, const Eigen::Vector3d& p) {
  return std::visit([&](const auto& s) { return s.contains(p); }, shape);
}

std::pair<Eigen::Vector3d, Eigen::Vector3d> bounds(const Shape& shape) {
  if (const auto* e = std::get_if<Ellipsoid>(&shape)) {
    const Eigen::Matrix3d r = e->rotation();
    Eigen::Vector3d half;
    for (int a = 0; a < 3; ++a) half[a] = (r.row(a).transpose().array() * e->semiaxes.array()).matrix().norm();
    return {e->center - half, e->center + half};
  }
  const auto& b = std::get<Box>(shape);
  return {b.corner, b.corner + b.size};
}

std::vector<BiIsotropicMaterial> Scene::materials() const {
  std::vector<BiIsotropicMaterial> out{background};
  for (const auto& s : shapes) out.push_back(s.material);
  return out;
}

Scene Scene::empty() const {
  Scene e = *this;
  e.shapes.clear();
  return e;
}

void validate(const Scene& scene) {
  if (!(scene.frequency > 0.0)) throw InvalidMaterialError("scene frequency must be positive");
  if (!(scene.domain_size.array() > 0.0).all()) throw GeometryError("domain size must be positive");
  validate(scene.background);
  const Eigen::Vector3d half = 0.5 * scene.domain_size;
  const double slack = 1e-9;
  for (const auto& s : scene.shapes) {
    validate(s.material);
    if (const auto* e = std::get_if<Ellipsoid>(&s.shape); e && !(e->semiaxes.array() > 0.0).all()) {
      throw GeometryError("shape '" + s.name + "' has non-positive semiaxes");
    }
    if (const auto* b = std::get_if<Box>(&s.shape); b && !(b->size.array() > 0.0).all()) {
      throw GeometryError("shape '" + s.name + "' has non-positive size");
    }
    const auto [lo, hi] = bounds(s.shape);
    if (((lo + half).array() < -slack).any() || ((hi - half).array() > slack).any()) {
      throw GeometryError("shape '" + s.name + "' extends outside the domain");
    }
  }
}

const BiIsotropicMaterial& material_at(const Scene& scene, const Eigen::Vector3d& p) {
  for (auto s = scene.shapes.rbegin(); s != scene.shapes.rend(); ++s) {
    if (contains(s->shape, p)) return s->material;
  }
  return scene.background;
}

PhantomParams PhantomParams::full_size() { return {}; }

PhantomParams PhantomParams::mini() {
  PhantomParams p;
  p.domain_size = Eigen::Vector3d::Constant(0.080);
  p.matching = {10.0, 0.0, 1.0, 0.0, 0.0};
  p.head = {10.0, 0.2, 1.0, 0.0, 0.0};
  p.head_semiaxes = Eigen::Vector3d::Constant(0.030);
  p.inclusion = {10.0, 0.2, 1.0, 0.5, 0.0};
  p.inclusion_semiaxes = {0.010, 0.015, 0.005};
  // centres the inclusion projection on a cell of the 6x6, 10 mm scan grid
  p.inclusion_offset = {0.005, 0.0, 0.005};
  return p;
}

Scene build_head_scene(const PhantomParams& p) {
  if (!(p.head_semiaxes.array() > 0.0).all() || !(p.inclusion_semiaxes.array() > 0.0).all()) {
    throw GeometryError("phantom semiaxes must be positive");
  }
  Ellipsoid head{p.head_center, p.head_semiaxes, Eigen::Vector3d::Zero()};
  Ellipsoid inclusion{p.head_center + p.inclusion_offset, p.inclusion_semiaxes, p.inclusion_euler};

  // sample the inclusion surface densely; every point must lie inside the head
  const Eigen::Matrix3d r = inclusion.rotation();
  constexpr int kPolar = 48;
  constexpr int kAzimuth = 96;
  for (int i = 0; i <= kPolar; ++i) {
    const double theta = std::numbers::pi * i / kPolar;
    for (int j = 0; j < kAzimuth; ++j) {
      const double phi = 2.0 * std::numbers::pi * j / kAzimuth;
      const Eigen::Vector3d local(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
      const Eigen::Vector3d point = inclusion.center + r * (local.array() * inclusion.semiaxes.array()).matrix();
      if (!head.contains(point)) throw GeometryError("chiral inclusion escapes the head");
    }
  }

  Scene scene;
  scene.frequency = p.frequency;
  scene.domain_size = p.domain_size;
  scene.background = p.matching;
  scene.shapes.push_back({head, p.head, "head"});
  scene.shapes.push_back({inclusion, p.inclusion, "inclusion"});
  validate(scene);
  return scene;
}

MaterialGrid voxelize(const Scene& scene, const GridSpec& gs, int supersample) {
  if (supersample != 1 && supersample != 2) throw GeometryError("supersample must be 1 or 2");
  validate(scene);
  validate(gs);

  MaterialGrid grid;
  grid.counts = gs.total_cells();
  grid.origin = gs.origin();
  grid.cell_size = gs.cell_size;

  // compact table: background first, then distinct shape materials
  std::vector<std::uint16_t> shape_index(scene.shapes.size());
  grid.table.push_back(scene.background);
  for (std::size_t s = 0; s < scene.shapes.size(); ++s) {
    const auto it = std::find(grid.table.begin(), grid.table.end(), scene.shapes[s].material);
    shape_index[s] = static_cast<std::uint16_t>(it - grid.table.begin());
    if (it == grid.table.end()) grid.table.push_back(scene.shapes[s].material);
  }

  std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>> boxes;
  for (const auto& s : scene.shapes) boxes.push_back(bounds(s.shape));

  auto material_at = [&](const Eigen::Vector3d& p) -> std::uint16_t {
    for (std::size_t s = scene.shapes.size(); s-- > 0;) {
      if (((p - boxes[s].first).array() < 0.0).any() || ((p - boxes[s].second).array() > 0.0).any()) continue;
      if (contains(scene.shapes[s].shape, p)) return shape_index[s];
    }
    return 0;
  };

  grid.index.resize(static_cast<std::size_t>(gs.cell_count()));
  const double h = gs.cell_size;
  std::vector<int> votes(grid.table.size());
  for (int k = 0; k < grid.counts[2]; ++k) {
    for (int j = 0; j < grid.counts[1]; ++j) {
      for (int i = 0; i < grid.counts[0]; ++i) {
        const Eigen::Vector3d c = grid.cell_center(i, j, k);
        std::uint16_t id = material_at(c);
        if (supersample == 2) {
          std::fill(votes.begin(), votes.end(), 0);
          for (int s = 0; s < 8; ++s) {
            const Eigen::Vector3d offset(s & 1 ? 0.25 : -0.25, s & 2 ? 0.25 : -0.25, s & 4 ? 0.25 : -0.25);
            ++votes[material_at(c + h * offset)];
          }
          const auto best = std::max_element(votes.begin(), votes.end());
          if (std::count(votes.begin(), votes.end(), *best) == 1) id = static_cast<std::uint16_t>(best - votes.begin());
        }
        grid.index[static_cast<std::size_t>(grid.linear(i, j, k))] = id;
      }
    }
  }
  return grid;
}

}  // namespace chiral
