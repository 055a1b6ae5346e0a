#include "nlagg/snapshot.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nlagg {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_snapshot(const std::filesystem::path& stem, const Snapshot& snap) {
  const Grid2D& g = snap.field.grid;
  std::filesystem::path csv = stem;
  csv += ".csv";
  std::filesystem::path side = stem;
  side += ".json";

  std::ofstream out(csv);
  if (!out) throw std::runtime_error("cannot write " + csv.string());
  for (int j = 0; j < g.n; ++j) {
    for (int i = 0; i < g.n; ++i) {
      if (i) out << ',';
      out << format_double(snap.field.values(i, j));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + csv.string());

  nlohmann::json meta = {{"x_min", g.x_min}, {"x_max", g.x_max}, {"y_min", g.y_min}, {"y_max", g.y_max},
                         {"n", g.n},         {"time", snap.time},  {"species", snap.species}};
  std::ofstream js(side);
  if (!js) throw std::runtime_error("cannot write " + side.string());
  js << meta.dump(2) << '\n';
  if (!js) throw std::runtime_error("write failed for " + side.string());
}

Snapshot read_snapshot(const std::filesystem::path& json_path) {
  std::ifstream js(json_path);
  if (!js) throw std::runtime_error("cannot read " + json_path.string());
  Snapshot snap;
  Grid2D g;
  try {
    const nlohmann::json meta = nlohmann::json::parse(js);
    g.x_min = meta.at("x_min").get<double>();
    g.x_max = meta.at("x_max").get<double>();
    g.y_min = meta.at("y_min").get<double>();
    g.y_max = meta.at("y_max").get<double>();
    g.n = meta.at("n").get<int>();
    snap.time = meta.at("time").get<double>();
    snap.species = meta.at("species").get<int>();
    g.validate();
  } catch (const std::exception& e) {
    throw std::runtime_error(json_path.string() + ": " + e.what());
  }

  std::filesystem::path csv = json_path;
  csv.replace_extension(".csv");
  std::ifstream in(csv);
  if (!in) throw std::runtime_error("cannot read " + csv.string());
  Eigen::ArrayXXd values(g.n, g.n);
  std::string line;
  for (int j = 0; j < g.n; ++j) {
    if (!std::getline(in, line)) throw std::runtime_error(csv.string() + ": expected " + std::to_string(g.n) + " rows");
    const char* p = line.c_str();
    for (int i = 0; i < g.n; ++i) {
      char* end = nullptr;
      values(i, j) = std::strtod(p, &end);
      if (end == p) throw std::runtime_error(csv.string() + ": bad value in row " + std::to_string(j + 1));
      p = end;
      if (i + 1 < g.n) {
        if (*p != ',') throw std::runtime_error(csv.string() + ": short row " + std::to_string(j + 1));
        ++p;
      }
    }
  }
  snap.field = Field(g, std::move(values));
  return snap;
}

}  // namespace nlagg
