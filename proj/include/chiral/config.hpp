#pragma once

#include <chiral/phantom.hpp>
#include <chiral/scan.hpp>
#include <chiral/slab1d.hpp>
#include <chiral/solver3d.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace chiral {

/// Grid section. Distances in the document are millimetres.
struct GridSettings {
  double cell_size = 2e-3;
  std::array<Boundary, 3> boundary{Boundary::absorbing, Boundary::absorbing, Boundary::absorbing};
  int absorber_cells = 10;
  int supersample = 2;
};

struct SourceSettings {
  SourceSpec source;
  std::optional<ApertureSpec> probe;  // optional receiving aperture for `solve`
};

struct SlabSweep {
  int layer = 0;
  double from = 1e-3;
  double to = 0.2;
  int steps = 50;
};

struct SlabSettings {
  slab::LayerStack stack;
  std::optional<SlabSweep> sweep;
};

struct OutputSettings {
  std::filesystem::path directory = "out";
  int render_scale = 16;
  bool field_dump = true;
};

struct RunConfig {
  std::string text;  // document as read, hashed into manifests
  double frequency = 2.45e9;
  std::map<std::string, BiIsotropicMaterial> materials;
  std::optional<Scene> scene;
  std::optional<GridSettings> grid;
  std::optional<ScanConfig> scan;
  Engine engine = Engine::tube;
  FullWaveOptions full_wave;
  std::optional<SourceSettings> source;
  std::optional<SlabSettings> slab;
  OutputSettings output;

  /// Grid covering the scene domain; throws ConfigError when a section is missing.
  GridSpec grid_spec() const;
};

/// Parses and schema-checks a configuration document. Unknown keys, wrong
/// types and out-of-range values raise ConfigError naming the offending key.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace chiral
