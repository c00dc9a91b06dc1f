#include <chiral/config.hpp>
#include <chiral/errors.hpp>
#include <chiral/io.hpp>

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace chiral;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "chiral_unit" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CHIRAL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const std::string kMinimal = R"({
  "materials": { "m": { "eps_r": 2.0 } },
  "scene": { "background": "m", "domain_mm": [40, 40, 40], "shapes": [] },
  "grid": { "cell_size_mm": 2 }
})";

}  // namespace

TEST_CASE("decibels") {
  CHECK(to_db(1.0) == 0.0);
  CHECK(to_db(0.01) == doctest::Approx(-20.0));
  CHECK(to_db(0.0) == kDecibelFloor);
  CHECK(to_db(1e-12) == kDecibelFloor);
}

TEST_CASE("map csv round trip") {
  ScanMap map;
  map.values = Eigen::MatrixXcd(2, 3);
  map.values << 0.1, 0.2, cplx(0.0, 0.3), 0.4, 0.5, 0.6;
  map.x_centers = {-0.02, 0.0, 0.02};
  map.z_centers = {-0.01, 0.01};
  const MapTable t = to_table(map, false);
  CHECK(t.z_mm.front() == doctest::Approx(10.0));  // top row first
  CHECK(t.values(0, 0) == doctest::Approx(0.16));
  CHECK(t.values(1, 2) == doctest::Approx(0.09));
  const fs::path dir = scratch("csv");
  write_map_csv(dir / "map.csv", t);
  const std::string text = read_text(dir / "map.csv");
  CHECK(text.rfind("z_mm\\x_mm,-20,0,20\n", 0) == 0);
  const MapTable back = read_map_csv(dir / "map.csv");
  CHECK(back.x_mm == t.x_mm);
  CHECK(back.z_mm == t.z_mm);
  CHECK((back.values - t.values).cwiseAbs().maxCoeff() < 1e-10 * t.values.maxCoeff());
  CHECK(to_table(map, true).values(1, 2) == doctest::Approx(10.0 * std::log10(0.09)));

  write_text(dir / "ragged.csv", "z_mm\\x_mm,0,1\n5,0.1\n");
  CHECK_THROWS_AS(read_map_csv(dir / "ragged.csv"), ConfigError);
  write_text(dir / "text.csv", "z_mm\\x_mm,0\n5,abc\n");
  CHECK_THROWS_AS(read_map_csv(dir / "text.csv"), ConfigError);
  CHECK_THROWS_AS(read_map_csv(dir / "missing.csv"), ConfigError);
}

TEST_CASE("graymap rendering") {
  MapTable t;
  t.x_mm = {0.0, 1.0};
  t.z_mm = {1.0};
  t.values = Eigen::MatrixXd(1, 2);
  t.values << 1.0, 1e-4;  // 0 dB and -40 dB
  const std::string pgm = render_pgm(t, 2);
  std::istringstream in(pgm);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  CHECK(magic == "P2");
  CHECK(w == 4);
  CHECK(h == 2);
  CHECK(maxval == 255);
  std::vector<int> px(8);
  for (auto& p : px) in >> p;
  CHECK(px == std::vector<int>{255, 255, 128, 128, 255, 255, 128, 128});
  std::istringstream lines(pgm);
  for (std::string line; std::getline(lines, line);) CHECK(line.size() < 70);

  t.values(0, 1) = -1.0;
  CHECK_THROWS_AS(render_pgm(t, 2), ConfigError);
}

TEST_CASE("config parsing") {
  const RunConfig c = parse_config(kMinimal);
  REQUIRE(c.scene);
  CHECK(c.scene->domain_size.isApprox(Eigen::Vector3d::Constant(0.04)));
  CHECK(c.grid->cell_size == doctest::Approx(2e-3));
  CHECK(c.grid_spec().extents == std::array<int, 3>{20, 20, 20});

  CHECK_THROWS_AS(parse_config("{"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"frequency": 1e9})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"materials": {"m": {"eps": 2}}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"materials": {"m": {"eps_r": "two"}}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"materials": {"m": {"eps_r": -2}}})"), ConfigError);
  std::string bad = kMinimal;
  bad.replace(bad.find("\"background\": \"m\""), 17, "\"background\": \"x\"");
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
  bad = kMinimal;
  bad.replace(bad.find("\"cell_size_mm\": 2"), 17, "\"cell_size_mm\": 2, \"absorber_cells\": 4");
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
  try {
    parse_config(R"({"output": {"dir": "x"}})");
    FAIL("accepted an unknown key");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("dir") != std::string::npos);
  }
}

TEST_CASE("shipped configurations load") {
  for (const char* name : {"head_phantom.json", "mini_phantom.json", "slab_matched.json"}) {
    CAPTURE(name);
    CHECK_NOTHROW(load_config(fs::path(CHIRAL_SOURCE_DIR) / "configs" / name));
  }
  const RunConfig mini = load_config(fs::path(CHIRAL_SOURCE_DIR) / "configs" / "mini_phantom.json");
  CHECK(mini.grid_spec().total_cells() == std::array<int, 3>{41, 41, 41});
  CHECK(mini.scan->columns == 6);
  CHECK(mini.scene->shapes.size() == 2);
}

TEST_CASE("command line exit codes and outputs") {
  const fs::path dir = scratch("cli");
  const fs::path configs = fs::path(CHIRAL_SOURCE_DIR) / "configs";

  CHECK(run_cli("validate --config " + (configs / "head_phantom.json").string()) == 0);
  write_text(dir / "unknown.json", R"({"frequency_hz": 2.45e9, "colour": 1})");
  CHECK(run_cli("validate --config " + (dir / "unknown.json").string()) == 2);
  CHECK(run_cli("scan") == 2);
  CHECK(run_cli("scan --config " + (dir / "missing.json").string()) == 2);

  CHECK(run_cli("slab --kappa 0.5 --thickness-mm 61.18 --out " + (dir / "slab").string()) == 0);
  CHECK(run_cli("slab --kappa 0.5 --eps-r -1 --thickness-mm 10 --out " + (dir / "slab").string()) == 2);

  const std::string solve_doc = R"({
    "materials": { "bg": { "eps_r": 1 } },
    "scene": { "background": "bg", "domain_mm": [16, 40, 16], "shapes": [] },
    "grid": { "cell_size_mm": CELL, "boundary": ["periodic", "absorbing", "periodic"], "absorber_cells": 8 },
    "source": { "kind": "plane_wave", "center_mm": [0, -10, 0], "normal_axis": "y", "polarization": [0, 0, 1],
                "probe": { "center_mm": [0, 10, 0], "polarization": [0, 0, 1], "full_plane": true } }
  })";
  std::string fine = solve_doc;
  fine.replace(fine.find("CELL"), 4, "2");
  write_text(dir / "solve.json", fine);
  CHECK(run_cli("solve --config " + (dir / "solve.json").string() + " --out " + (dir / "solve").string()) == 0);
  CHECK(fs::exists(dir / "solve" / "field.bin"));
  CHECK(fs::exists(dir / "solve" / "solve_manifest.json"));
  std::string coarse = solve_doc;
  coarse.replace(coarse.find("CELL"), 4, "30");  // beyond a fifth of the wavelength
  write_text(dir / "coarse.json", coarse);
  CHECK(run_cli("solve --config " + (dir / "coarse.json").string() + " --out " + (dir / "solve").string()) == 3);

  const fs::path out = dir / "mini";
  REQUIRE(run_cli("scan --engine tube --config " + (configs / "mini_phantom.json").string() + " --out " +
                  out.string()) == 0);
  for (const char* f : {"map.csv", "map_db.csv", "map.pgm", "manifest.json"}) CHECK(fs::exists(out / f));
  const std::string manifest = read_text(out / "manifest.json");
  CHECK(manifest.find("\"engine\": \"tube\"") != std::string::npos);
  CHECK(manifest.find("sha256") != std::string::npos);

  const fs::path env_out = dir / "env";
  setenv("CHIRAL_OUT_DIR", env_out.c_str(), 1);
  CHECK(run_cli("render --map " + (out / "map.csv").string() + " --scale 4") == 0);
  unsetenv("CHIRAL_OUT_DIR");
  CHECK(fs::exists(env_out / "map.pgm"));

  // a Tellegen shape without propagating waves fails every tube cell it touches
  write_text(dir / "abort.json", R"({
    "materials": { "bg": { "eps_r": 1 }, "bad": { "chi": 2 } },
    "scene": { "background": "bg", "domain_mm": [100, 100, 100],
               "shapes": [ { "type": "box", "material": "bad", "corner_mm": [-50, -10, -50], "size_mm": [100, 20, 100] } ] },
    "grid": { "cell_size_mm": 5 },
    "scan": { "cells": [2, 2], "pitch_mm": 20, "standoff_mm": 10, "engine": "tube" }
  })");
  CHECK(run_cli("scan --config " + (dir / "abort.json").string() + " --out " + (dir / "abort").string()) == 4);
}
