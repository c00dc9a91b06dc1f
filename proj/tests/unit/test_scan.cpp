#include <chiral/errors.hpp>
#include <chiral/scan.hpp>

#include <doctest.h>

#include <cmath>

using namespace chiral;

namespace {

// lossless background with a chiral slab spanning the whole x-z cross-section
Scene slab_scene(double kappa, double thickness, double eps_r = 1.0, double sigma = 0.0) {
  Scene s;
  s.domain_size = {0.1, 0.1, 0.1};
  s.background.eps_r = eps_r;
  BiIsotropicMaterial m{eps_r, sigma, 1.0, kappa, 0.0};
  s.shapes.push_back({Box{{-0.05, -0.5 * thickness, -0.05}, {0.1, thickness, 0.1}}, m, "slab"});
  return s;
}

ScanConfig small_scan() {
  ScanConfig cfg;
  cfg.columns = 4;
  cfg.rows = 3;
  cfg.pitch = 0.02;
  cfg.standoff = 0.01;
  return cfg;
}

}  // namespace

TEST_CASE("scan config validation") {
  const Scene s = slab_scene(0.5, 0.02);
  ScanConfig cfg = small_scan();
  CHECK_NOTHROW(validate(cfg, s));
  ScanConfig bad = cfg;
  bad.rx_polarization = {1.0, 0.0, 1.0};
  CHECK_THROWS_AS(validate(bad, s), ConfigError);
  bad = cfg;
  bad.tx_polarization = Eigen::Vector3d::UnitY();
  CHECK_THROWS_AS(validate(bad, s), ConfigError);
  bad = cfg;
  bad.columns = 6;  // 120 mm across a 100 mm domain
  CHECK_THROWS_AS(validate(bad, s), ConfigError);
  bad = cfg;
  bad.center = {0.015, 0.0};  // apertures of the last column leave the domain
  CHECK_THROWS_AS(validate(bad, s), ConfigError);
  bad = cfg;
  bad.standoff = 0.06;
  CHECK_THROWS_AS(validate(bad, s), ConfigError);
  bad = cfg;
  bad.jobs = 0;
  CHECK_THROWS_AS(validate(bad, s), ConfigError);
  bad = cfg;
  bad.abort_fraction = 0.0;
  CHECK_THROWS_AS(validate(bad, s), ConfigError);
  CHECK(engine_from_string("tube") == Engine::tube);
  CHECK(to_string(Engine::full_wave) == "full");
  CHECK_THROWS_AS(engine_from_string("fdtd"), ConfigError);
}

TEST_CASE("scan geometry") {
  const Scene s = slab_scene(0.5, 0.02);
  const ScanConfig cfg = small_scan();
  CHECK(scan_cell_center(cfg, 0, 0).isApprox(Eigen::Vector3d(-0.03, 0.0, -0.02)));
  CHECK(scan_cell_center(cfg, 3, 2).isApprox(Eigen::Vector3d(0.03, 0.0, 0.02)));
  const auto [y0, y1] = aperture_planes(cfg, s);
  CHECK(y0 == doctest::Approx(-0.04));
  CHECK(y1 == doctest::Approx(0.04));
  const ApertureSpec tx = tx_aperture(cfg, s, 1, 2);
  const ApertureSpec rx = rx_aperture(cfg, s, 1, 2);
  CHECK(tx.polarization == Eigen::Vector3d::UnitZ());
  CHECK(rx.polarization == Eigen::Vector3d::UnitX());
  CHECK(rx.size_across == tx.size_along);
  CHECK(rx.size_along == tx.size_across);
  CHECK(rx.center.x() == tx.center.x());
  CHECK_THROWS_AS(tube_estimate(s, cfg, 4, 0), GeometryError);
}

TEST_CASE("tube closed form through a uniform slab") {
  // alpha~ d = 1.5404460911344862 rad for kappa = 0.5, d = 60 mm
  const Scene s = slab_scene(0.5, 0.06);
  const ScanConfig cfg = small_scan();
  const TubeRay ray = trace_tube_ray(s, cfg, 0.01, -0.02);
  CHECK(ray.rotation == doctest::Approx(1.5404460911344862).epsilon(1e-12));
  CHECK(ray.attenuation == 0.0);
  const ScanMap map = run_scan(s, cfg, Engine::tube, {});
  for (int r = 0; r < cfg.rows; ++r)
    for (int c = 0; c < cfg.columns; ++c) CHECK(std::norm(map.values(r, c)) == doctest::Approx(0.9990791459916273).epsilon(1e-12));
}

TEST_CASE("tube attenuation of a lossy slab") {
  // eps_r = 53, sigma = 1.1 S/m: 28.379672558829885 Np/m, independent of kappa
  const Scene s = slab_scene(0.5, 0.02, 53.0, 1.1);
  ScanConfig cfg = small_scan();
  const TubeRay ray = trace_tube_ray(s, cfg, 0.0, 0.0);
  CHECK(ray.attenuation == doctest::Approx(28.379672558829885 * 0.02).epsilon(1e-12));
  const double expected = std::pow(std::sin(ray.rotation), 2) * std::exp(-2.0 * 28.379672558829885 * 0.02);
  CHECK(tube_estimate(s, cfg, 0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("achiral scenes give an exactly null tube map") {
  for (const auto& s : {slab_scene(0.0, 0.03), slab_scene(0.0, 0.03, 53.0, 1.1),
                        build_head_scene([] {
                          PhantomParams p = PhantomParams::mini();
                          p.inclusion.kappa = 0.0;
                          return p;
                        }())}) {
    ScanConfig cfg = small_scan();
    cfg.pitch = 0.01;
    const ScanMap map = run_scan(s, cfg, Engine::tube, {});
    CHECK(map.values.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("tube parity, monotonicity and scheduling") {
  PhantomParams p = PhantomParams::mini();
  ScanConfig cfg;
  cfg.columns = cfg.rows = 6;
  cfg.pitch = 0.01;
  cfg.standoff = 0.005;
  const ScanMap base = run_scan(build_head_scene(p), cfg, Engine::tube, {});
  CHECK(base.values.cwiseAbs().maxCoeff() > 0.0);

  p.inclusion.kappa = -0.5;
  const ScanMap flipped = run_scan(build_head_scene(p), cfg, Engine::tube, {});
  CHECK(base.power() == flipped.power());

  // small rotations: cross power grows with |kappa| wherever it is non-zero
  Eigen::MatrixXd previous = Eigen::MatrixXd::Zero(cfg.rows, cfg.columns);
  for (double kappa : {0.02, 0.05, 0.1}) {
    p.inclusion.kappa = kappa;
    const Eigen::MatrixXd power = run_scan(build_head_scene(p), cfg, Engine::tube, {}).power();
    for (Eigen::Index i = 0; i < power.size(); ++i) {
      if (base.power()(i) > 0.0) CHECK(power(i) > previous(i));
    }
    previous = power;
  }

  p.inclusion.kappa = 0.5;
  cfg.jobs = 3;
  const ScanMap threaded = run_scan(build_head_scene(p), cfg, Engine::tube, {});
  CHECK(threaded.values == base.values);
}

TEST_CASE("failed cells and the abort rule") {
  // a Tellegen box with chi^2 > eps_r mu_r supports no propagating waves
  Scene s = slab_scene(0.5, 0.02);
  BiIsotropicMaterial bad;
  bad.chi = 2.0;
  s.shapes.push_back({Box{{-0.05, -0.01, -0.03}, {0.02, 0.02, 0.02}}, bad, "bad"});
  ScanConfig cfg = small_scan();
  cfg.abort_fraction = 0.5;
  const ScanMap map = run_scan(s, cfg, Engine::tube, {});
  CHECK(map.failures() == 1);  // only cell (0, 0) sees the box
  CHECK_FALSE(map.diagnostics[0].ok);
  CHECK(map.diagnostics[0].error.find("propagating") != std::string::npos);
  CHECK(map.values(0, 0) == cplx{0.0, 0.0});

  cfg.abort_fraction = 1.0 / 12.0;  // one failure of twelve is enough
  CHECK_THROWS_AS(run_scan(s, cfg, Engine::tube, {}), ScanAbortedError);
}

TEST_CASE("full-wave scan failures abort") {
  Scene s;
  s.domain_size = {0.032, 0.04, 0.032};
  BiIsotropicMaterial c;
  c.kappa = 0.5;
  s.shapes.push_back({Ellipsoid{Eigen::Vector3d::Zero(), {0.008, 0.006, 0.008}, Eigen::Vector3d::Zero()}, c, "c"});
  const GridSpec gs =
      make_grid_spec(s.domain_size, 4e-3, {Boundary::periodic, Boundary::absorbing, Boundary::periodic}, 8);
  ScanConfig cfg;
  cfg.columns = cfg.rows = 2;
  cfg.pitch = 0.008;
  cfg.standoff = 0.008;
  cfg.aperture_across = cfg.aperture_along = 0.008;

  const ScanMap ok = run_scan(s, cfg, Engine::full_wave, gs);
  CHECK(ok.failures() == 0);
  CHECK(ok.values.cwiseAbs().maxCoeff() > 0.0);

  FullWaveOptions starved;
  starved.solver.direct_threshold = 0;
  starved.solver.max_iterations = 2;
  starved.solver.checkpoint = 1;
  CHECK_THROWS_AS(run_scan(s, cfg, Engine::full_wave, gs, starved), ScanAbortedError);

  GridSpec coarse = gs;
  coarse.cell_size = 0.04;
  coarse.extents = {1, 1, 1};
  CHECK_THROWS_AS(run_scan(s, cfg, Engine::full_wave, coarse), ResolutionError);
}
