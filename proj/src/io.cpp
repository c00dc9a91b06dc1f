#include <chiral/io.hpp>

#include <chiral/errors.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace chiral {

double to_db(double power, double floor) {
  if (!(power > 0.0)) return floor;
  return std::max(floor, 10.0 * std::log10(power));
}

MapTable to_table(const ScanMap& map, bool decibels) {
  MapTable t;
  const auto rows = static_cast<int>(map.values.rows());
  const auto cols = static_cast<int>(map.values.cols());
  for (double x : map.x_centers) t.x_mm.push_back(x * 1e3);
  t.values.resize(rows, cols);
  const Eigen::MatrixXd power = map.power();
  for (int r = 0; r < rows; ++r) {
    const int src = rows - 1 - r;
    t.z_mm.push_back(map.z_centers[static_cast<std::size_t>(src)] * 1e3);
    for (int c = 0; c < cols; ++c) t.values(r, c) = decibels ? to_db(power(src, c)) : power(src, c);
  }
  return t;
}

namespace {

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::vector<double> parse_row(const std::string& line, int lineno) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(field, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < field.size() && std::isspace(static_cast<unsigned char>(field[used]))) ++used;
    if (used == 0 || used != field.size()) {
      throw ConfigError("map CSV line " + std::to_string(lineno) + ": '" + field + "' is not a number");
    }
    out.push_back(v);
  }
  return out;
}

}  // namespace

void write_map_csv(const std::filesystem::path& path, const MapTable& t) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "z_mm\\x_mm";
  for (double x : t.x_mm) out << ',' << number(x);
  out << '\n';
  for (Eigen::Index r = 0; r < t.values.rows(); ++r) {
    out << number(t.z_mm[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < t.values.cols(); ++c) out << ',' << number(t.values(r, c));
    out << '\n';
  }
}

MapTable read_map_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read map CSV " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("map CSV is empty");
  const auto comma = line.find(',');
  if (comma == std::string::npos) throw ConfigError("map CSV header has no x centres");
  MapTable t;
  t.x_mm = parse_row(line.substr(comma + 1), 1);
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto row = parse_row(line, lineno);
    if (row.size() != t.x_mm.size() + 1) {
      throw ConfigError("map CSV line " + std::to_string(lineno) + " has " + std::to_string(row.size()) +
                        " fields, expected " + std::to_string(t.x_mm.size() + 1));
    }
    t.z_mm.push_back(row.front());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("map CSV has no rows");
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.x_mm.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < t.x_mm.size(); ++c) t.values(r, c) = rows[r][c + 1];
  return t;
}

std::string render_pgm(const MapTable& t, int block) {
  if (block < 1) throw ConfigError("render scale must be positive");
  const auto rows = t.values.rows(), cols = t.values.cols();
  std::ostringstream out;
  out << "P2\n" << cols * block << ' ' << rows * block << "\n255\n";
  for (Eigen::Index r = 0; r < rows; ++r) {
    std::vector<int> levels;
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double v = t.values(r, c);
      if (v < 0.0 || !std::isfinite(v)) throw ConfigError("map holds a negative or non-finite power");
      const int level = static_cast<int>(std::lround(255.0 * (to_db(v) - kDecibelFloor) / -kDecibelFloor));
      levels.insert(levels.end(), static_cast<std::size_t>(block), level);
    }
    // plain PGM lines stay under 70 characters
    std::string line;
    for (int b = 0; b < block; ++b) {
      for (int level : levels) {
        const std::string token = std::to_string(level);
        if (!line.empty() && line.size() + 1 + token.size() > 70) {
          out << line << '\n';
          line.clear();
        }
        line += (line.empty() ? "" : " ") + token;
      }
      out << line << '\n';
      line.clear();
    }
  }
  return out.str();
}

}  // namespace chiral
