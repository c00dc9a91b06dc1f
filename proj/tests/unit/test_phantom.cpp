#include <chiral/errors.hpp>
#include <chiral/grid.hpp>
#include <chiral/phantom.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace chiral;

namespace {

BiIsotropicMaterial dielectric(double eps_r, double kappa = 0.0) {
  BiIsotropicMaterial m;
  m.eps_r = eps_r;
  m.kappa = kappa;
  return m;
}

GridSpec periodic_grid(double domain, double h) {
  return make_grid_spec(Eigen::Vector3d::Constant(domain), h,
                        {Boundary::periodic, Boundary::periodic, Boundary::periodic});
}

double voxel_volume(const MaterialGrid& g, std::uint16_t id) {
  const auto n = std::count(g.index.begin(), g.index.end(), id);
  return static_cast<double>(n) * std::pow(g.cell_size, 3);
}

Scene sphere_scene(double r) {
  Scene s;
  s.domain_size = Eigen::Vector3d::Constant(0.1);
  s.shapes.push_back({Ellipsoid{Eigen::Vector3d::Zero(), Eigen::Vector3d::Constant(r), Eigen::Vector3d::Zero()},
                      dielectric(4.0), "sphere"});
  return s;
}

}  // namespace

TEST_CASE("grid spec geometry") {
  const GridSpec gs = make_grid_spec({0.08, 0.08, 0.08}, 0.004);
  CHECK(gs.extents == std::array<int, 3>{20, 20, 20});
  CHECK(gs.total_cells(0) == 40);
  CHECK(gs.origin().x() == doctest::Approx(-0.08));
  CHECK(gs.domain_size().y() == doctest::Approx(0.08));

  GridSpec bad = gs;
  bad.absorber_thickness = 6;
  CHECK_THROWS_AS(validate(bad), GeometryError);
  bad = gs;
  bad.cell_size = -1.0;
  CHECK_THROWS_AS(validate(bad), GeometryError);
  CHECK_THROWS_AS(boundary_from_string("open"), ConfigError);
}

TEST_CASE("resolution check") {
  const std::vector<BiIsotropicMaterial> mats{dielectric(53.0)};
  // lambda in eps_r = 53 is 16.03 mm
  CHECK(check_resolution(1.5e-3, mats, 2.45e9) == ResolutionStatus::ok);
  CHECK(check_resolution(2.5e-3, mats, 2.45e9) == ResolutionStatus::coarse);
  CHECK_THROWS_AS(check_resolution(4e-3, mats, 2.45e9), ResolutionError);
}

TEST_CASE("empty scene voxelizes to background") {
  Scene s;
  s.domain_size = Eigen::Vector3d::Constant(0.02);
  s.background = dielectric(3.0);
  const MaterialGrid g = voxelize(s, make_grid_spec(s.domain_size, 0.002));
  CHECK(g.table.size() == 1);
  CHECK(g.table[0] == s.background);
  CHECK(std::all_of(g.index.begin(), g.index.end(), [](auto i) { return i == 0; }));
}

TEST_CASE("grid-aligned box has the exact cell count") {
  Scene s;
  s.domain_size = Eigen::Vector3d::Constant(0.04);
  s.shapes.push_back({Box{{-0.01, -0.006, 0.0}, {0.012, 0.008, 0.016}}, dielectric(2.0), "box"});
  for (int ss : {1, 2}) {
    const MaterialGrid g = voxelize(s, periodic_grid(0.04, 0.002), ss);
    CHECK(std::count(g.index.begin(), g.index.end(), 1) == 6 * 4 * 8);
  }
}

TEST_CASE("sphere volume converges") {
  const double r = 0.02;
  const double exact = 4.0 / 3.0 * std::numbers::pi * r * r * r;
  double previous = 1.0;
  for (double h : {0.004, 0.002, 0.001}) {
    const MaterialGrid g = voxelize(sphere_scene(r), periodic_grid(0.1, h));
    const double err = std::abs(voxel_volume(g, 1) - exact) / exact;
    CHECK(err < previous);
    previous = err;
  }
  CHECK(previous < 0.01);  // r / h = 20
}

TEST_CASE("supersampling and determinism") {
  const Scene s = sphere_scene(0.013);
  const GridSpec gs = periodic_grid(0.1, 0.002);
  const MaterialGrid a = voxelize(s, gs, 2);
  const MaterialGrid b = voxelize(s, gs, 2);
  CHECK(a.index == b.index);
  const double exact = 4.0 / 3.0 * std::numbers::pi * std::pow(0.013, 3);
  CHECK(std::abs(voxel_volume(a, 1) - exact) / exact < 0.08);  // r / h = 6.5
  CHECK_THROWS_AS(voxelize(s, gs, 3), GeometryError);
}

TEST_CASE("painter's order and permutation invariance") {
  Scene s;
  s.domain_size = Eigen::Vector3d::Constant(0.06);
  const SceneShape big{Ellipsoid{Eigen::Vector3d::Zero(), Eigen::Vector3d::Constant(0.02), Eigen::Vector3d::Zero()},
                       dielectric(4.0), "big"};
  const SceneShape small{Box{{-0.004, -0.004, -0.004}, {0.008, 0.008, 0.008}}, dielectric(9.0), "small"};
  const SceneShape apart{Box{{0.022, 0.022, 0.022}, {0.006, 0.006, 0.006}}, dielectric(2.0), "apart"};
  const GridSpec gs = periodic_grid(0.06, 0.002);

  s.shapes = {big, small};
  MaterialGrid g = voxelize(s, gs);
  CHECK(g.at(15, 15, 15).eps_r == 9.0);  // inner box painted last
  s.shapes = {small, big};
  g = voxelize(s, gs);
  CHECK(g.at(15, 15, 15).eps_r == 4.0);

  s.shapes = {big, apart};
  const MaterialGrid p = voxelize(s, gs);
  s.shapes = {apart, big};
  const MaterialGrid q = voxelize(s, gs);
  for (std::size_t i = 0; i < p.index.size(); ++i) REQUIRE(p.table[p.index[i]] == q.table[q.index[i]]);
}

TEST_CASE("rotated ellipsoid") {
  Ellipsoid e{Eigen::Vector3d::Zero(), {0.03, 0.01, 0.01}, {0.0, 0.0, std::numbers::pi / 2}};
  CHECK(e.contains({0.0, 0.025, 0.0}));
  CHECK_FALSE(e.contains({0.025, 0.0, 0.0}));
  const auto [lo, hi] = bounds(Shape{e});
  CHECK(hi.y() == doctest::Approx(0.03));
  CHECK(hi.x() == doctest::Approx(0.01));
}

TEST_CASE("head phantom") {
  const Scene s = build_head_scene(PhantomParams::full_size());
  REQUIRE(s.shapes.size() == 2);
  CHECK(s.background.eps_r == 53.0);
  CHECK(s.background.sigma == 0.0);
  CHECK(s.shapes[0].material.sigma == 1.1);
  CHECK(s.shapes[1].material.kappa == 0.5);
  CHECK(material_at(s, Eigen::Vector3d::Zero()).kappa == 0.5);
  CHECK(material_at(s, {0.0, 0.1, 0.0}).sigma == 1.1);
  CHECK(material_at(s, {0.0, 0.14, 0.0}).sigma == 0.0);

  PhantomParams p = PhantomParams::full_size();
  p.inclusion.kappa = 0.0;
  const Scene null = build_head_scene(p);
  CHECK(null.shapes[1].material.kappa == 0.0);
  CHECK(null.shapes[1].material.sigma == s.shapes[1].material.sigma);

  p = PhantomParams::full_size();
  p.inclusion_offset = {0.08, 0.0, 0.0};
  CHECK_THROWS_AS(build_head_scene(p), GeometryError);

  p = PhantomParams::full_size();
  p.head_semiaxes = {0.2, 0.115, 0.1};
  CHECK_THROWS_AS(build_head_scene(p), GeometryError);  // leaves the domain
}

TEST_CASE("mini phantom preset") {
  const PhantomParams p = PhantomParams::mini();
  const Scene s = build_head_scene(p);
  CHECK(s.domain_size.x() == doctest::Approx(0.08));
  CHECK(s.background.eps_r == 10.0);
  CHECK(s.shapes[0].material.sigma == 0.2);
  CHECK(s.shapes[1].material.kappa == 0.5);
  CHECK(std::get<Ellipsoid>(s.shapes[0].shape).semiaxes.x() == doctest::Approx(0.03));
}
