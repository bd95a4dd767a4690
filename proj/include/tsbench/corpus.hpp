#pragma once

// Builds per-task corpora at a fraction of the published sample counts. Each
// attempt draws its series from a seed derived from (corpus seed, task,
// attempt number), so the item stream does not depend on thread count.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tsbench/llm_bridge.hpp"
#include "tsbench/qa_item.hpp"
#include "tsbench/taskgen.hpp"

namespace tsbench::corpus {

struct TaskQuota {
  TaskKind kind;
  std::size_t full_count;
  std::size_t min_length;
  std::size_t max_length;
};

/// Full-scale sample counts and length ranges, in publication order.
const std::vector<TaskQuota>& quotas();
const TaskQuota& quota(TaskKind kind);
std::size_t scaled_count(std::size_t full_count, double scale);

struct BuildConfig {
  double scale = 0.01;
  std::uint64_t seed = 42;
  std::vector<TaskKind> tasks;  // empty: every task the configuration can serve
  // Explicit per-task counts override scale.
  std::map<TaskKind, std::size_t> counts;
  double gate_threshold = 0.90;
  std::size_t jobs = 1;
  std::size_t attempt_factor = 50;  // attempt budget = factor x target + 100

  taskgen::SuccessorConfig successor;
  std::size_t successor_pool = 12;
  std::size_t successor_host_length = 256;
  std::size_t pattern_pool = 6;

  // Pattern descriptions; null uses the offline template describer.
  llm::Describer* describer = nullptr;
  // Plot for a series, for describers that look at the image.
  std::function<llm::RenderAssets(const Series&)> plot_for;

  // Semantic items need both a client and real series.
  llm::ChatClient* l3_client = nullptr;
  std::vector<llm::RealSeries> real_series;
  llm::L3Options l3;
};

/// Tasks the config can build when `tasks` is empty: all L1/L2, plus
/// semantic when an L3 client is set. Successor items are opt-in.
std::vector<TaskKind> default_tasks(const BuildConfig& cfg);

struct TaskStats {
  TaskKind kind = TaskKind::minmax;
  std::size_t target = 0;
  std::size_t emitted = 0;
  std::size_t attempts = 0;
  std::size_t generated = 0;  // items produced by the generator, before the gate
  std::size_t verified = 0;
  std::size_t verify_failed = 0;
  std::size_t not_applicable = 0;
  std::size_t held_out = 0;
  std::map<std::string, std::size_t> skips;  // reason -> count
  std::vector<std::string> failures;         // first few verification failures

  double pass_rate() const noexcept;
  bool complete() const noexcept { return emitted == target; }
};

struct Corpus {
  std::vector<QAItem> items;
  std::vector<QAItem> held_out;  // L3 items routed to the held-out audit split
  std::vector<TaskStats> stats;
  double gate_threshold = 0.90;

  /// Every task reached its target and its pass rate meets the threshold.
  bool gate_passed() const noexcept;
};

Corpus build(const BuildConfig& cfg);

/// Counts, seed, versions and pass rates as pretty-printed JSON.
std::string manifest_json(const Corpus& corpus, const BuildConfig& cfg);

}  // namespace tsbench::corpus
