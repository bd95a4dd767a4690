#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsbench/llm_bridge.hpp"
#include "tsbench/qa_item.hpp"
#include "tsbench/render.hpp"
#include "tsbench/scoring.hpp"

namespace tsbench::harness {

// Encoding strategies ------------------------------------------------------------

enum class Strategy {
  text_no_index,
  text_with_index,
  vision_plot,
  vision_plot_num,
  vision_plus_text_no_index,
  vision_plus_text_with_index,
};

std::string_view to_string(Strategy) noexcept;
Strategy strategy_from_string(std::string_view name);
const std::vector<Strategy>& all_strategies();

/// A plot alone cannot carry exact read-out tasks.
bool supports(Strategy strategy, TaskKind kind) noexcept;

struct ModelRequest {
  std::string item_id;
  Strategy strategy = Strategy::text_no_index;
  std::string text;
  std::vector<llm::ImageRef> images;  // attached ahead of the text, in order

  /// sha256 over the canonical JSON of (strategy, text, image paths).
  std::string digest() const;
  std::string to_json() const;
};

/// Series text views: "[v0, v1, ...]" and "[[0,v0], [1,v1], ...]" at printed precision.
std::string serialize_values(std::span<const double> values);
std::string serialize_indexed(std::span<const double> values);

/// Image assets are resolved against `assets_root` when relative.
ModelRequest encode_instruction(Strategy strategy, const QAItem& item, const std::filesystem::path& assets_root = {});

// Assets ----------------------------------------------------------------------------

struct RenderSummary {
  std::size_t written = 0;
  std::size_t unchanged = 0;
};

/// Renders the plot, numeric grid (and the 2x2 panel for successor items)
/// under `dir`, recording relative paths in item.assets. One sidecar JSON per item.
RenderSummary render_item_assets(QAItem& item, const std::filesystem::path& dir, const std::filesystem::path& relative_to,
                                 const render::GridParams& grid = {});

// Dataset files -----------------------------------------------------------------------

inline constexpr int kSchemaVersion = 1;

std::string item_to_json(const QAItem& item);
/// Throws Errc::schema_violation naming the field, or Errc::unsupported_version.
QAItem item_from_json(std::string_view line);

void write_dataset(const std::filesystem::path& path, std::span<const QAItem> items);
/// Errors carry "path:line".
std::vector<QAItem> read_dataset(const std::filesystem::path& path);

/// Seeded uniform sample without replacement, kept in dataset order.
std::vector<QAItem> subsample(std::span<const QAItem> items, std::size_t n, std::uint64_t seed);

// Agents ---------------------------------------------------------------------------------

struct AgentReply {
  std::string text;
  int attempts = 1;
  double latency_ms = 0.0;
  std::string audit_ref;
};

/// Must be safe to call from several threads at once.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual std::string model_id() const = 0;
  virtual AgentReply answer(const QAItem& item, const ModelRequest& request) = 0;
};

/// Emits the stored key in the requested answer format.
class OracleAgent final : public Agent {
 public:
  std::string model_id() const override { return "oracle"; }
  AgentReply answer(const QAItem& item, const ModelRequest& request) override;
};

/// Uniform letter per (seed, item id); open-answer items get a non-answer.
class RandomAgent final : public Agent {
 public:
  explicit RandomAgent(std::uint64_t seed) : seed_(seed) {}
  std::string model_id() const override;
  AgentReply answer(const QAItem& item, const ModelRequest& request) override;

 private:
  std::uint64_t seed_;
};

class ConstantAgent final : public Agent {
 public:
  explicit ConstantAgent(char letter);
  std::string model_id() const override;
  AgentReply answer(const QAItem& item, const ModelRequest& request) override;

 private:
  char letter_;
};

class EndpointAgent final : public Agent {
 public:
  explicit EndpointAgent(llm::ChatClient& client) : client_(client) {}
  std::string model_id() const override { return client_.config().model; }
  AgentReply answer(const QAItem& item, const ModelRequest& request) override;

 private:
  llm::ChatClient& client_;
};

/// "oracle", "random[:seed]", "constant:X"; endpoints are built by the caller.
std::unique_ptr<Agent> make_scripted_agent(std::string_view spec);

// Runner -----------------------------------------------------------------------------------

struct RunRecord {
  std::string item_id;
  TaskKind task_kind = TaskKind::minmax;
  Strategy strategy = Strategy::text_no_index;
  std::string model;
  std::string request_digest;
  std::string prompt;  // ModelRequest JSON the digest was taken over
  std::string raw_response;
  bool parse_ok = false;
  std::vector<std::string> notes;
  bool acc = false;
  bool half = false;
  bool sr = false;
  double latency_ms = 0.0;
  int attempts = 0;
  std::string audit_ref;

  std::string key() const;  // item id, strategy and model
  scoring::ItemScore score() const;
};

std::string record_to_json(const RunRecord& record);
RunRecord record_from_json(std::string_view line);
/// Complete lines only; a torn final line from a crash is ignored.
std::vector<RunRecord> read_records(const std::filesystem::path& path);

/// Token bucket: `rate` tokens per second, at most `burst` banked. Rate 0 never waits.
class TokenBucket {
 public:
  TokenBucket(double rate, double burst);
  void acquire();

 private:
  double rate_;
  double burst_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mu_;
};

struct RunConfig {
  Strategy strategy = Strategy::text_no_index;
  std::filesystem::path records;  // JSONL, appended
  std::filesystem::path assets_root;
  bool resume = true;
  std::size_t jobs = 4;
  std::size_t max_failures = 5;  // consecutive agent errors before the run aborts
  std::optional<std::size_t> stop_after;  // commit this many new records, then stop
  double rate_per_sec = 0.0;
  double burst = 1.0;
  scoring::ToleranceRule tolerance;
};

struct RunResult {
  std::vector<RunRecord> records;  // every record in the log for this (strategy, model), resumed ones included
  std::size_t resumed = 0;
  std::size_t executed = 0;
  std::size_t failed = 0;
  bool aborted = false;
  bool interrupted = false;
  std::string abort_reason;
  std::optional<scoring::Metrics> metrics;
};

/// Items the strategy cannot carry throw Errc::strategy_rejected before anything runs.
RunResult run_eval(std::span<const QAItem> items, Agent& agent, const RunConfig& cfg);

// Reports -------------------------------------------------------------------------------------

/// One row per (model, strategy), with task columns in the style of a results table.
struct ReportRow {
  std::string model;
  Strategy strategy = Strategy::text_no_index;
  scoring::MetricCell overall;
  std::map<TaskKind, scoring::MetricCell> per_task;
  std::map<Level, scoring::MetricCell> per_level;
};

struct Report {
  std::vector<ReportRow> rows;
  std::vector<TaskKind> tasks;  // union over rows, in task order
};

Report make_report(std::span<const RunRecord> records);
std::string report_csv(const Report& report);
std::string report_json(const Report& report);
std::string report_text(const Report& report);

}  // namespace tsbench::harness
