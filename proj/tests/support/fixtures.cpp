#include "fixtures.hpp"

#include <cmath>
#include <cstdlib>
#include <fmt/format.h>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>
#include <sstream>

#include "tsbench/rng.hpp"

namespace tsbench::testing {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const char* root = std::getenv("TSBENCH_TEST_TMP");
  const fs::path dir = (root && *root ? fs::path(root) : fs::temp_directory_path() / "tsbench-tests") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<llm::RealSeries> real_like_series(std::size_t count, std::uint64_t seed, std::size_t length) {
  struct Scenario {
    const char* name;
    const char* sampling;
    double base, swing, drift, noise;
    std::size_t period;
  };
  static const Scenario kScenarios[] = {
      {"hourly air temperature in a temperate city (Celsius)", "1 hour", 14.0, 6.0, 0.002, 0.6, 24},
      {"regional electricity load (MW)", "30 minutes", 5200.0, 900.0, 0.4, 60.0, 48},
      {"road traffic occupancy rate", "1 hour", 0.08, 0.05, 0.0, 0.006, 24},
      {"indoor CO2 concentration in an office (ppm)", "15 minutes", 520.0, 180.0, 0.0, 15.0, 96},
  };
  std::vector<llm::RealSeries> out;
  Rng rng(seed);
  for (std::size_t k = 0; k < count; ++k) {
    const Scenario& sc = kScenarios[k % std::size(kScenarios)];
    llm::RealSeries r;
    r.series.id = fmt::format("real-{}-{}", seed, k);
    r.series.sampling_label = sc.sampling;
    r.series.source = SeriesSource::synthetic;
    r.scenario = sc.name;
    const double phase = rng.uniform();
    for (std::size_t i = 0; i < length; ++i) {
      const double cycle = std::sin(2.0 * std::numbers::pi * (static_cast<double>(i) / sc.period + phase));
      r.series.values.push_back(sc.base + sc.swing * cycle + sc.drift * static_cast<double>(i) + sc.noise * rng.normal());
    }
    r.crop_lengths = {24, 48, 96, 168, 336, 0};
    out.push_back(std::move(r));
  }
  return out;
}

void write_real_series(const fs::path& path, const std::vector<llm::RealSeries>& sources) {
  std::ofstream out(path);
  for (const auto& s : sources) {
    nlohmann::json crops = nlohmann::json::array();
    for (std::size_t c : s.crop_lengths) c == 0 ? crops.push_back("full") : crops.push_back(c);
    out << nlohmann::json{{"id", s.series.id},
                          {"values", s.series.values},
                          {"sampling_label", s.series.sampling_label},
                          {"scenario", s.scenario},
                          {"crop_lengths", crops}}
               .dump()
        << '\n';
  }
}

Series make_series(std::string id, std::vector<double> values) {
  Series s;
  s.id = std::move(id);
  s.values = std::move(values);
  return s;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace tsbench::testing
