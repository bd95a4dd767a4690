#include "tsbench/corpus.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <thread>

#include "tsbench/error.hpp"
#include "tsbench/features.hpp"
#include "tsbench/rng.hpp"
#include "tsbench/synth.hpp"

namespace tsbench::corpus {

const std::vector<TaskQuota>& quotas() {
  static const std::vector<TaskQuota> table{
      {TaskKind::minmax, 10000, 64, 512},
      {TaskKind::multiseries_compare, 10000, 64, 256},
      {TaskKind::start_end, 5000, 64, 512},
      {TaskKind::subseries_localize, 5000, 64, 512},
      {TaskKind::local_pattern, 16098, 64, 256},
      {TaskKind::global_pattern, 24605, 64, 1024},
      {TaskKind::numerical_perception, 10000, 64, 256},
      {TaskKind::semantic, 3121, 24, 2048},
      // Successor items: lookback + patch cut from longer synthetic hosts.
      {TaskKind::successor, 4993, 120, 120},
  };
  return table;
}

const TaskQuota& quota(TaskKind kind) {
  for (const auto& q : quotas()) {
    if (q.kind == kind) return q;
  }
  throw Error(Errc::invalid_config, fmt::format("no quota for task {}", to_string(kind)));
}

std::size_t scaled_count(std::size_t full_count, double scale) {
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw Error(Errc::invalid_config, "scale must be a non-negative number");
  return static_cast<std::size_t>(std::llround(scale * static_cast<double>(full_count)));
}

std::vector<TaskKind> default_tasks(const BuildConfig& cfg) {
  std::vector<TaskKind> out;
  for (const auto& q : quotas()) {
    if (q.kind == TaskKind::successor) continue;
    if (q.kind == TaskKind::semantic && !cfg.l3_client) continue;
    out.push_back(q.kind);
  }
  return out;
}

double TaskStats::pass_rate() const noexcept {
  if (generated == 0) return target == 0 ? 1.0 : 0.0;
  return static_cast<double>(verified + not_applicable) / static_cast<double>(generated);
}

bool Corpus::gate_passed() const noexcept {
  return std::all_of(stats.begin(), stats.end(),
                     [&](const TaskStats& s) { return s.complete() && s.pass_rate() >= gate_threshold; });
}

namespace {

struct Attempt {
  std::optional<QAItem> item;
  bool held_out = false;
  std::string skip;  // empty when an item was produced
  std::string skip_detail;
  std::optional<taskgen::VerificationResult> verdict;
};

std::size_t draw_length(Rng& rng, const TaskQuota& q) {
  return static_cast<std::size_t>(
      rng.uniform_int(static_cast<std::int64_t>(q.min_length), static_cast<std::int64_t>(q.max_length)));
}

Series synth_series(std::uint64_t seed, std::size_t length) {
  return synth::synthesize(synth::sample_spec(seed, length)).series;
}

std::vector<Series> synth_pool(std::uint64_t seed, std::size_t count, std::size_t length) {
  std::vector<Series> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(synth_series(derive_seed(seed, i), length));
  return out;
}

class Builder {
 public:
  explicit Builder(const BuildConfig& cfg) : cfg_(cfg) {
    if (!cfg_.describer) describer_ = &template_describer_;
    else describer_ = cfg_.describer;
  }

  Attempt run(TaskKind kind, std::uint64_t seed) const {
    const TaskQuota& q = quota(kind);
    Rng rng = Rng(seed).stream("shape");
    taskgen::Generated g;
    switch (kind) {
      case TaskKind::minmax: g = taskgen::gen_minmax(synth_series(seed, draw_length(rng, q)), seed); break;
      case TaskKind::start_end: g = taskgen::gen_start_end(synth_series(seed, draw_length(rng, q)), seed); break;
      case TaskKind::multiseries_compare: {
        const auto n = static_cast<std::size_t>(rng.uniform_int(2, 5));
        g = taskgen::gen_multiseries(synth_pool(seed, n, draw_length(rng, q)), seed);
        break;
      }
      case TaskKind::subseries_localize: {
        const auto n = static_cast<std::size_t>(rng.uniform_int(1, 5));
        g = taskgen::gen_subseries(synth_pool(seed, n, draw_length(rng, q)), seed);
        break;
      }
      case TaskKind::numerical_perception:
        g = taskgen::gen_numerical_perception(synth_series(seed, draw_length(rng, q)), seed);
        break;
      case TaskKind::local_pattern:
      case TaskKind::global_pattern: g = pattern_item(kind, seed, draw_length(rng, q)); break;
      case TaskKind::successor: {
        const auto pool = synth_pool(seed, cfg_.successor_pool, cfg_.successor_host_length);
        g = taskgen::gen_successor_mcq(pool, cfg_.successor, seed);
        break;
      }
      case TaskKind::semantic: return semantic_item(seed);
    }
    Attempt a;
    if (!g) {
      a.skip = std::string(taskgen::to_string(g.reason));
      a.skip_detail = g.detail;
      return a;
    }
    validate_item(*g.item);
    a.verdict = taskgen::verify_uniqueness(*g.item);
    a.item = std::move(g.item);
    return a;
  }

 private:
  taskgen::Generated pattern_item(TaskKind kind, std::uint64_t seed, std::size_t length) const {
    std::vector<llm::Description> pool;
    for (std::size_t i = 0; i < std::max<std::size_t>(cfg_.pattern_pool, 4); ++i) {
      const auto spec = synth::sample_spec(derive_seed(seed, i), length);
      Series s = synth::synthesize(spec).series;
      llm::PromptInputs hints;
      hints.seasonality = spec.seasonality;
      const auto renders = cfg_.plot_for ? cfg_.plot_for(s) : llm::RenderAssets{};
      std::string text = describer_->describe(s, features::annotate(s), kind, hints, renders);
      pool.push_back({std::move(s), std::move(text)});
    }
    return llm::distractor_pool_mcq(pool, kind, seed, 0);
  }

  Attempt semantic_item(std::uint64_t seed) const {
    Attempt a;
    if (!cfg_.l3_client || cfg_.real_series.empty()) {
      throw Error(Errc::invalid_config, "semantic items need an endpoint and a real-series file");
    }
    const auto& source = cfg_.real_series[seed % cfg_.real_series.size()];
    auto outcome = llm::generate_l3_item(*cfg_.l3_client, source, seed, cfg_.l3);
    using Route = llm::L3Outcome::Route;
    if (outcome.route == Route::accepted || outcome.route == Route::held_out) {
      validate_item(*outcome.item);
      a.verdict = taskgen::verify_uniqueness(*outcome.item);
      a.item = std::move(outcome.item);
      a.held_out = outcome.route == Route::held_out;
    } else {
      a.skip = std::string(llm::to_string(outcome.route));
      a.skip_detail = outcome.detail;
    }
    return a;
  }

  const BuildConfig& cfg_;
  llm::TemplateDescriber template_describer_;
  llm::Describer* describer_ = nullptr;
};

/// Runs attempts [first, first + n) on up to `jobs` threads; results by position.
std::vector<Attempt> run_batch(const Builder& b, TaskKind kind, std::uint64_t task_seed, std::size_t first,
                               std::size_t n, std::size_t jobs) {
  std::vector<Attempt> out(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out[i] = b.run(kind, derive_seed(task_seed, first + i));
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(std::max<std::size_t>(jobs, 1), n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace

Corpus build(const BuildConfig& cfg) {
  if (cfg.gate_threshold < 0.0 || cfg.gate_threshold > 1.0) throw Error(Errc::invalid_config, "gate threshold outside [0, 1]");
  taskgen::validate(cfg.successor);
  const auto tasks = cfg.tasks.empty() ? default_tasks(cfg) : cfg.tasks;
  Builder builder(cfg);
  Corpus corpus;
  corpus.gate_threshold = cfg.gate_threshold;

  for (TaskKind kind : tasks) {
    TaskStats st;
    st.kind = kind;
    const auto override_it = cfg.counts.find(kind);
    st.target = override_it != cfg.counts.end() ? override_it->second : scaled_count(quota(kind).full_count, cfg.scale);
    if (st.target > 0 && kind == TaskKind::semantic && (!cfg.l3_client || cfg.real_series.empty())) {
      throw Error(Errc::invalid_config, "semantic items need an endpoint and a real-series file");
    }
    const std::uint64_t task_seed = derive_seed(cfg.seed, to_string(kind));
    const std::size_t budget = cfg.attempt_factor * st.target + 100;
    const std::size_t batch = std::max<std::size_t>(cfg.jobs * 4, 1);

    while (st.emitted < st.target && st.attempts < budget) {
      const std::size_t n = std::min({batch, budget - st.attempts, st.target - st.emitted});
      auto results = run_batch(builder, kind, task_seed, st.attempts, n, cfg.jobs);
      for (auto& a : results) {
        if (st.emitted == st.target) break;
        ++st.attempts;
        if (!a.item) {
          ++st.skips[a.skip];
          continue;
        }
        ++st.generated;
        const auto status = a.verdict->status;
        if (status == taskgen::VerificationResult::Status::fail) {
          ++st.verify_failed;
          if (st.failures.size() < 10) st.failures.push_back(fmt::format("{}: {}", a.item->id, a.verdict->detail));
          continue;
        }
        if (status == taskgen::VerificationResult::Status::pass) {
          ++st.verified;
          a.item->provenance.flags.push_back("verified_unique");
        } else {
          ++st.not_applicable;
        }
        if (a.held_out) {
          ++st.held_out;
          corpus.held_out.push_back(std::move(*a.item));
        } else {
          ++st.emitted;
          corpus.items.push_back(std::move(*a.item));
        }
      }
    }
    corpus.stats.push_back(std::move(st));
  }
  return corpus;
}

std::string manifest_json(const Corpus& corpus, const BuildConfig& cfg) {
  using nlohmann::ordered_json;
  ordered_json tasks = ordered_json::array();
  for (const auto& s : corpus.stats) {
    ordered_json skips = ordered_json::object();
    for (const auto& [reason, n] : s.skips) skips[reason] = n;
    tasks.push_back({{"task", std::string(to_string(s.kind))},
                     {"level", std::string(to_string(level_of(s.kind)))},
                     {"target", s.target},
                     {"emitted", s.emitted},
                     {"held_out", s.held_out},
                     {"attempts", s.attempts},
                     {"generated", s.generated},
                     {"verified", s.verified},
                     {"verify_failed", s.verify_failed},
                     {"not_applicable", s.not_applicable},
                     {"pass_rate", s.pass_rate()},
                     {"skips", skips},
                     {"failures", s.failures}});
  }
  ordered_json doc = {{"generator_version", std::string(kGeneratorVersion)},
                      {"template_version", std::string(llm::kTemplateVersion)},
                      {"seed", cfg.seed},
                      {"scale", cfg.scale},
                      {"gate_threshold", corpus.gate_threshold},
                      {"gate_passed", corpus.gate_passed()},
                      {"items", corpus.items.size()},
                      {"held_out_items", corpus.held_out.size()},
                      {"successor",
                       {{"context_len", cfg.successor.context_len},
                        {"patch_len", cfg.successor.patch_len},
                        {"r_reject", cfg.successor.r_reject},
                        {"r_mutual_max", cfg.successor.r_mutual_max},
                        {"safety_window", cfg.successor.effective_safety_window()},
                        {"w_gap", cfg.successor.weights.gap},
                        {"w_grad", cfg.successor.weights.grad}}},
                      {"tasks", tasks}};
  return doc.dump(2);
}

}  // namespace tsbench::corpus
