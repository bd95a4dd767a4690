#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tsbench/llm_bridge.hpp"
#include "tsbench/qa_item.hpp"

namespace tsbench::testing {

/// Fresh, empty scratch directory under TSBENCH_TEST_TMP (or the system temp dir).
std::filesystem::path scratch_dir(const std::string& name);

/// Stand-ins for real recordings: daily cycles, drift and noise with a scenario label.
std::vector<llm::RealSeries> real_like_series(std::size_t count, std::uint64_t seed, std::size_t length = 720);

void write_real_series(const std::filesystem::path& path, const std::vector<llm::RealSeries>& sources);

Series make_series(std::string id, std::vector<double> values);

std::string read_file(const std::filesystem::path& path);

}  // namespace tsbench::testing
