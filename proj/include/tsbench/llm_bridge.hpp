#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsbench/features.hpp"
#include "tsbench/qa_item.hpp"
#include "tsbench/series.hpp"
#include "tsbench/synth.hpp"
#include "tsbench/taskgen.hpp"

namespace tsbench::llm {

// Prompt templates -----------------------------------------------------------

// `evaluation` marks benchmark prompts built by the harness; it has no asset.
enum class TemplateId { l2_annotate, l2_cot, l3_generate, l3_examine, evaluation };

std::string_view to_string(TemplateId) noexcept;
inline constexpr std::string_view kTemplateVersion = "1";

/// Raw template asset text. A line reading <<<USER>>> separates system and user parts.
std::string_view template_text(TemplateId id) noexcept;

/// Replaces every {{name}} slot; throws Errc::template_incomplete naming the first unfilled slot.
std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& slots);

struct ImageRef {
  std::string path;
  std::string mime = "image/png";
  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

struct PromptBundle {
  std::string system_text;
  std::string user_text;
  std::vector<ImageRef> images;
  TemplateId template_id = TemplateId::l2_annotate;
  std::string template_version{kTemplateVersion};
  friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

struct RenderAssets {
  std::optional<std::string> plot;  // path of the line plot PNG
};

struct PromptInputs {
  // Seasonality shape name when known from the synthesis recipe.
  std::optional<synth::SeasonalityKind> seasonality;
  std::vector<Option> options;       // l2_cot
  std::string scenario;              // l3_generate: source description
  std::string item_json;             // l3_examine: the generated item under review
};

/// Annotation serialized in the annotation prompt's field order.
std::string metadata_block(const Series& series, const features::SeriesAnnotation& annotation,
                           std::optional<synth::SeasonalityKind> seasonality = std::nullopt);

/// Serialized as [[0,v0],[1,v1],...] with shortest round-trip values.
std::string indexed_array(std::span<const double> values);

PromptBundle build_prompt(TemplateId id, const Series& series, const features::SeriesAnnotation& annotation,
                          const RenderAssets& renders, const PromptInputs& inputs = {});

// Endpoint client -------------------------------------------------------------

enum class ImageMode { data_uri, file_ref };

struct ClientConfig {
  std::string base_url;  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key_env = "TSBENCH_API_KEY";  // empty: send no credential
  int max_retries = 3;
  std::chrono::milliseconds backoff{250};
  double backoff_factor = 2.0;
  std::chrono::milliseconds timeout{std::chrono::seconds(60)};
  double temperature = 0.0;
  int max_tokens = 2048;
  ImageMode image_mode = ImageMode::data_uri;
  std::filesystem::path audit_log;  // JSONL, one record per attempt; empty disables
  std::size_t max_in_flight = 4;
};

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
  int attempts = 0;
  double latency_ms = 0.0;
  std::string audit_ref;  // path#line of the last attempt's audit record
};

struct Completion {
  std::string text;
  Usage usage;
};

/// Serializes appends to one JSONL file across threads and clients.
class AuditLog {
 public:
  explicit AuditLog(std::filesystem::path path);
  /// Appends one line and flushes; returns a "path#line" reference.
  std::string append(const std::string& json_line);
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mu_;
  std::size_t lines_ = 0;
};

/// Chat-completion request body for a bundle (exposed for audit replay and tests).
std::string request_body(const ClientConfig& cfg, const PromptBundle& bundle);

class ChatClient {
 public:
  explicit ChatClient(ClientConfig cfg);
  ~ChatClient();
  ChatClient(const ChatClient&) = delete;
  ChatClient& operator=(const ChatClient&) = delete;

  /// Sends the bundle with bounded retries. Throws Errc::auth_failure,
  /// rate_limited, timeout or transport; each message carries the audit reference.
  Completion complete(const PromptBundle& bundle);
  const ClientConfig& config() const noexcept { return cfg_; }

 private:
  struct Impl;
  ClientConfig cfg_;
  std::unique_ptr<Impl> impl_;
};

Completion request_completion(const ClientConfig& cfg, const PromptBundle& bundle);

// L3 items and examiner verdicts ------------------------------------------------

enum class ErrorType { none, pattern, value, semantic };
std::string_view to_string(ErrorType) noexcept;

struct OptionAnalysis {
  std::string evaluation;
  ErrorType error_type = ErrorType::none;
};

struct L3Item {
  std::string question;
  std::map<char, std::string> options;
  std::map<char, OptionAnalysis> chain_of_thought;
  std::vector<std::pair<std::size_t, double>> checked_values;
  bool neighbor_consistency = false;
  char final_answer = 'A';
};

struct L3Parse {
  L3Item item;
  bool surrounding_text = false;  // JSON had to be cut out of extra prose
};

/// Strict schema check. Errors: l3_unparseable, l3_missing_field,
/// l3_duplicate_correct, l3_invariant.
L3Parse parse_l3_item(std::string_view raw, std::optional<std::size_t> series_length = std::nullopt);

/// The item in the JSON shape the generator was asked for.
std::string l3_item_json(const L3Item& item);

QAItem to_qa_item(const L3Item& item, const Series& series, std::uint64_t seed);

struct Verdict {
  bool valid = false;
  std::string reason;
};

/// Accepts the two fixed examiner output shapes; anything else throws Errc::malformed_verdict.
Verdict parse_examiner_verdict(std::string_view raw);

/// Seeded-hash hold-out routing, stable for a given (seed, id).
bool held_out(std::string_view item_id, std::uint64_t seed, double fraction = 0.10) noexcept;

// L2 pattern descriptions ---------------------------------------------------------

struct Description {
  Series series;
  std::string text;
};

class Describer {
 public:
  virtual ~Describer() = default;
  virtual std::string describe(const Series& series, const features::SeriesAnnotation& annotation, TaskKind kind,
                               const PromptInputs& hints, const RenderAssets& renders) = 0;
};

/// Offline describer that phrases annotation facts in fixed sentences.
class TemplateDescriber final : public Describer {
 public:
  std::string describe(const Series& series, const features::SeriesAnnotation& annotation, TaskKind kind,
                       const PromptInputs& hints, const RenderAssets& renders) override;
};

/// Sends the annotation prompt with the series plot to an endpoint.
class EndpointDescriber final : public Describer {
 public:
  explicit EndpointDescriber(ChatClient& client) : client_(client) {}
  std::string describe(const Series& series, const features::SeriesAnnotation& annotation, TaskKind kind,
                       const PromptInputs& hints, const RenderAssets& renders) override;

 private:
  ChatClient& client_;
};

/// Pattern MC item: the target's own description against three descriptions
/// of other series. `target` defaults to a seed-chosen entry.
taskgen::Generated distractor_pool_mcq(std::span<const Description> pool, TaskKind kind, std::uint64_t seed,
                                       std::optional<std::size_t> target = std::nullopt);

// L3 generation pipeline ------------------------------------------------------------

struct RealSeries {
  Series series;
  std::string scenario;
  std::vector<std::size_t> crop_lengths;  // 0 stands for the full series
};

/// JSONL with fields id, values, sampling_label, scenario, crop_lengths (ints or "full").
std::vector<RealSeries> read_real_series(const std::filesystem::path& path);

struct L3Outcome {
  enum class Route { accepted, held_out, rejected, quarantined, human_review } route = Route::rejected;
  std::optional<QAItem> item;
  std::string raw;     // generator reply
  std::string detail;  // parse error or examiner reason
};

std::string_view to_string(L3Outcome::Route) noexcept;

struct L3Options {
  std::size_t min_length = 24;
  std::size_t max_length = 2048;
  bool second_examiner_pass = false;
  double holdout_fraction = 0.10;
};

L3Outcome generate_l3_item(ChatClient& client, const RealSeries& source, std::uint64_t seed,
                           const L3Options& options = {}, const RenderAssets& renders = {});

}  // namespace tsbench::llm
