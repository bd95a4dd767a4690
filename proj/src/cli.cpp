#include "tsbench/cli.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <fmt/format.h>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "tsbench/corpus.hpp"
#include "tsbench/error.hpp"
#include "tsbench/harness.hpp"
#include "tsbench/render.hpp"

namespace tsbench::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct Globals {
  std::uint64_t seed = 42;
  std::size_t jobs = 4;
  fs::path out = "out";
  fs::path config;
  bool force = false;
};

/// Run settings a config file may carry; flags given on the command line win.
struct FileConfig {
  std::optional<llm::ClientConfig> endpoint;
  std::optional<std::string> strategy;
  std::optional<std::size_t> jobs;
  std::optional<double> rate_per_sec;
  std::optional<double> burst;
  std::optional<std::size_t> max_failures;
};

void reject_unknown(const json& obj, const std::set<std::string>& known, std::string_view where) {
  for (const auto& [key, _] : obj.items()) {
    if (!known.contains(key)) throw Error(Errc::invalid_config, fmt::format("{}: unknown key '{}'", where, key));
  }
}

FileConfig load_config(const fs::path& path) {
  FileConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw Error(Errc::invalid_config, fmt::format("cannot read config '{}'", path.string()));
  try {
    const json doc = json::parse(in);
    reject_unknown(doc, {"endpoint", "run"}, path.string());
    if (doc.contains("endpoint")) {
      const json& e = doc["endpoint"];
      reject_unknown(e,
                     {"base_url", "path", "model", "api_key_env", "max_retries", "backoff_ms", "backoff_factor",
                      "timeout_ms", "temperature", "max_tokens", "image_mode", "audit_log", "max_in_flight"},
                     "endpoint");
      llm::ClientConfig c;
      c.base_url = e.at("base_url").get<std::string>();
      c.model = e.at("model").get<std::string>();
      c.path = e.value("path", c.path);
      c.api_key_env = e.value("api_key_env", c.api_key_env);
      c.max_retries = e.value("max_retries", c.max_retries);
      c.backoff = std::chrono::milliseconds(e.value("backoff_ms", c.backoff.count()));
      c.backoff_factor = e.value("backoff_factor", c.backoff_factor);
      c.timeout = std::chrono::milliseconds(e.value("timeout_ms", c.timeout.count()));
      c.temperature = e.value("temperature", c.temperature);
      c.max_tokens = e.value("max_tokens", c.max_tokens);
      c.max_in_flight = e.value("max_in_flight", c.max_in_flight);
      const std::string mode = e.value("image_mode", std::string("data_uri"));
      if (mode == "data_uri") c.image_mode = llm::ImageMode::data_uri;
      else if (mode == "file_ref") c.image_mode = llm::ImageMode::file_ref;
      else throw Error(Errc::invalid_config, fmt::format("image_mode '{}' (valid: data_uri, file_ref)", mode));
      if (e.contains("audit_log")) c.audit_log = e["audit_log"].get<std::string>();
      cfg.endpoint = std::move(c);
    }
    if (doc.contains("run")) {
      const json& r = doc["run"];
      reject_unknown(r, {"strategy", "jobs", "rate_per_sec", "burst", "max_failures"}, "run");
      if (r.contains("strategy")) cfg.strategy = r["strategy"].get<std::string>();
      if (r.contains("jobs")) cfg.jobs = r["jobs"].get<std::size_t>();
      if (r.contains("rate_per_sec")) cfg.rate_per_sec = r["rate_per_sec"].get<double>();
      if (r.contains("burst")) cfg.burst = r["burst"].get<double>();
      if (r.contains("max_failures")) cfg.max_failures = r["max_failures"].get<std::size_t>();
    }
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_config, fmt::format("{}: {}", path.string(), e.what()));
  }
  return cfg;
}

std::vector<TaskKind> all_task_kinds() {
  std::vector<TaskKind> out;
  for (const auto& q : corpus::quotas()) out.push_back(q.kind);
  return out;
}

/// Level names (L1..L4) and task names, in any mix.
std::vector<TaskKind> parse_filter(const std::vector<std::string>& names) {
  std::vector<TaskKind> out;
  auto add = [&](TaskKind k) {
    if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
  };
  for (const auto& name : names) {
    bool matched = false;
    for (TaskKind k : all_task_kinds()) {
      if (to_string(level_of(k)) == name || to_string(k) == name) {
        add(k);
        matched = true;
      }
    }
    if (!matched) {
      std::string valid = "L1, L2, L3, L4";
      for (TaskKind k : all_task_kinds()) valid += fmt::format(", {}", to_string(k));
      throw Error(Errc::invalid_config, fmt::format("unknown level or task '{}' (valid: {})", name, valid));
    }
  }
  return out;
}

void ensure_writable(const fs::path& path, bool force) {
  if (fs::exists(path) && !force) {
    throw Error(Errc::invalid_config, fmt::format("'{}' exists; pass --force to overwrite", path.string()));
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(Errc::io_error, fmt::format("cannot write '{}'", path.string()));
}

std::string dataset_text(std::span<const QAItem> items) {
  std::string out;
  for (const auto& item : items) out += harness::item_to_json(item) + '\n';
  return out;
}

harness::RenderSummary render_all(std::vector<QAItem>& items, const fs::path& dir, const fs::path& relative_to,
                                  std::size_t jobs, std::ostream& log) {
  fs::create_directories(dir);
  std::atomic<std::size_t> next{0}, written{0}, unchanged{0};
  std::mutex err_mu;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      try {
        const auto s = harness::render_item_assets(items[i], dir, relative_to);
        written += s.written;
        unchanged += s.unchanged;
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!error) error = std::current_exception();
        next = items.size();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::max<std::size_t>(1, jobs); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  log << fmt::format("render: {} items, {} files written, {} unchanged\n", items.size(), written.load(),
                     unchanged.load());
  return {written.load(), unchanged.load()};
}

/// Writes each describer plot once, keyed by the series id.
class PlotCache {
 public:
  explicit PlotCache(fs::path dir) : dir_(std::move(dir)) {}
  llm::RenderAssets operator()(const Series& s) {
    const auto path = dir_ / fmt::format("{}.plot.png", s.id);
    fs::create_directories(dir_);
    render::write_if_changed(path, render::encode_png(render::render_plot(std::span(&s, 1)).image));
    return {path.string()};
  }

 private:
  fs::path dir_;
};

int cmd_gen(const Globals& g, const FileConfig& fc, const std::vector<std::string>& levels, double scale,
            const std::vector<std::string>& counts, std::optional<double> gate, const fs::path& real_series,
            const std::string& describer, bool no_render, const std::string& command, std::ostream& log) {
  const fs::path dataset = g.out / "dataset.jsonl";
  ensure_writable(dataset, g.force);
  if (scale < 0.0) throw Error(Errc::invalid_config, "--scale must not be negative");

  corpus::BuildConfig cfg;
  cfg.scale = scale;
  cfg.seed = g.seed;
  cfg.jobs = g.jobs;
  cfg.tasks = parse_filter(levels);
  if (gate) cfg.gate_threshold = *gate;
  for (const auto& c : counts) {
    const auto eq = c.find('=');
    double n = 0;
    if (eq == std::string::npos || !parse_number(c.substr(eq + 1), n) || n < 0 || n != std::floor(n)) {
      throw Error(Errc::invalid_config, fmt::format("--count expects task=N, got '{}'", c));
    }
    const auto kinds = parse_filter({c.substr(0, eq)});
    for (TaskKind k : kinds) cfg.counts[k] = static_cast<std::size_t>(n);
  }

  const bool wants_semantic = std::find(cfg.tasks.begin(), cfg.tasks.end(), TaskKind::semantic) != cfg.tasks.end();
  std::unique_ptr<llm::ChatClient> client;
  std::unique_ptr<llm::EndpointDescriber> endpoint_describer;
  PlotCache plots(g.out / "assets" / "describe");
  if (wants_semantic || describer == "endpoint") {
    if (!fc.endpoint) throw Error(Errc::invalid_config, "an endpoint section in --config is required for this run");
    client = std::make_unique<llm::ChatClient>(*fc.endpoint);
  }
  if (wants_semantic) {
    if (real_series.empty()) throw Error(Errc::invalid_config, "semantic items need --real-series");
    cfg.l3_client = client.get();
    cfg.real_series = llm::read_real_series(real_series);
  }
  if (describer == "endpoint") {
    endpoint_describer = std::make_unique<llm::EndpointDescriber>(*client);
    cfg.describer = endpoint_describer.get();
    cfg.plot_for = std::ref(plots);
  } else if (describer != "template") {
    throw Error(Errc::invalid_config, fmt::format("unknown describer '{}' (valid: template, endpoint)", describer));
  }

  log << fmt::format("gen: seed {}, scale {}, {} task(s)\n", cfg.seed, cfg.scale,
                     (cfg.tasks.empty() ? corpus::default_tasks(cfg) : cfg.tasks).size());
  auto built = corpus::build(cfg);
  for (const auto& s : built.stats) {
    log << fmt::format("  {:<22} {:>6}/{:<6} pass {:6.2f}%  attempts {}\n", to_string(s.kind), s.emitted, s.target,
                       100.0 * s.pass_rate(), s.attempts);
  }

  fs::create_directories(g.out);
  auto manifest = ordered_json::parse(corpus::manifest_json(built, cfg));
  manifest["command"] = command;
  write_text(g.out / "manifest.json", manifest.dump(2) + "\n");
  if (!built.gate_passed()) {
    for (const auto& s : built.stats) {
      for (const auto& f : s.failures) log << fmt::format("  {} failure: {}\n", to_string(s.kind), f);
    }
    log << fmt::format("gen: gate failed (threshold {:.2f}); see {}\n", built.gate_threshold,
                       (g.out / "manifest.json").string());
    return gate_failed;
  }
  if (!no_render) {
    render_all(built.items, g.out / "assets", g.out, g.jobs, log);
    if (!built.held_out.empty()) render_all(built.held_out, g.out / "assets", g.out, g.jobs, log);
  }
  harness::write_dataset(dataset, built.items);
  if (!built.held_out.empty()) harness::write_dataset(g.out / "heldout.jsonl", built.held_out);
  log << fmt::format("gen: wrote {} items to {}\n", built.items.size(), dataset.string());
  return ok;
}

int cmd_render(const Globals& g, fs::path dataset, fs::path assets, std::ostream& log) {
  if (dataset.empty()) dataset = g.out / "dataset.jsonl";
  auto items = harness::read_dataset(dataset);
  const fs::path root = dataset.has_parent_path() ? dataset.parent_path() : fs::path(".");
  if (assets.empty()) assets = root / "assets";
  render_all(items, assets, root, g.jobs, log);
  if (render::write_if_changed(dataset, dataset_text(items))) log << "render: dataset asset paths updated\n";
  return ok;
}

std::vector<QAItem> filter_items(std::vector<QAItem> items, const std::vector<TaskKind>& kinds) {
  if (kinds.empty()) return items;
  std::erase_if(items, [&](const QAItem& it) { return std::find(kinds.begin(), kinds.end(), it.task_kind) == kinds.end(); });
  return items;
}

void write_reports(const harness::Report& report, const fs::path& stem) {
  write_text(fs::path(stem.string() + ".csv"), harness::report_csv(report));
  write_text(fs::path(stem.string() + ".json"), harness::report_json(report) + "\n");
  write_text(fs::path(stem.string() + ".txt"), harness::report_text(report));
}

struct EvalArgs {
  fs::path dataset;
  std::string agent;
  std::string strategy;
  std::vector<std::string> levels;
  fs::path records;
  bool resume = false;
  std::optional<std::size_t> sample;
  std::optional<std::size_t> stop_after;
  std::optional<double> rate;
  std::optional<double> burst;
  std::optional<std::size_t> max_failures;
  double tolerance = 0.5;
};

int cmd_eval(const Globals& g, const FileConfig& fc, const EvalArgs& a, std::ostream& log) {
  const fs::path dataset = a.dataset.empty() ? g.out / "dataset.jsonl" : a.dataset;
  const fs::path records = a.records.empty() ? g.out / "records.jsonl" : a.records;
  if (!a.resume) ensure_writable(records, g.force);
  else if (records.has_parent_path()) fs::create_directories(records.parent_path());

  harness::RunConfig rc;
  rc.strategy = harness::strategy_from_string(!a.strategy.empty() ? a.strategy : fc.strategy.value_or("text_no_index"));
  rc.records = records;
  rc.assets_root = dataset.has_parent_path() ? dataset.parent_path() : fs::path(".");
  rc.resume = a.resume;
  rc.jobs = fc.jobs.value_or(g.jobs);
  rc.max_failures = a.max_failures.value_or(fc.max_failures.value_or(rc.max_failures));
  rc.stop_after = a.stop_after;
  rc.rate_per_sec = a.rate.value_or(fc.rate_per_sec.value_or(0.0));
  rc.burst = a.burst.value_or(fc.burst.value_or(1.0));
  rc.tolerance = scoring::ToleranceRule{a.tolerance};

  auto items = filter_items(harness::read_dataset(dataset), parse_filter(a.levels));
  if (a.sample) items = harness::subsample(items, *a.sample, g.seed);

  std::unique_ptr<llm::ChatClient> client;
  std::unique_ptr<harness::Agent> agent;
  if (a.agent == "endpoint") {
    if (!fc.endpoint) throw Error(Errc::invalid_config, "--agent endpoint needs an endpoint section in --config");
    client = std::make_unique<llm::ChatClient>(*fc.endpoint);
    agent = std::make_unique<harness::EndpointAgent>(*client);
  } else {
    agent = harness::make_scripted_agent(a.agent);
  }

  log << fmt::format("eval: {} items, agent {}, strategy {}\n", items.size(), agent->model_id(),
                     harness::to_string(rc.strategy));
  const auto result = harness::run_eval(items, *agent, rc);
  log << fmt::format("eval: {} resumed, {} executed, {} failed\n", result.resumed, result.executed, result.failed);
  if (!result.records.empty()) {
    const auto report = harness::make_report(result.records);
    write_reports(report, records.parent_path() / (records.stem().string() + ".report"));
    log << harness::report_text(report);
  }
  if (result.aborted) {
    log << fmt::format("eval: aborted after consecutive failures: {}\n", result.abort_reason);
    return client ? endpoint_failed : failure;
  }
  if (result.interrupted) log << "eval: stopped early; rerun with --resume to finish\n";
  return ok;
}

int cmd_score(const Globals& g, fs::path dataset, const fs::path& records, double tolerance, std::ostream& log) {
  if (dataset.empty()) dataset = g.out / "dataset.jsonl";
  const fs::path out = g.out / "scores.json";
  ensure_writable(out, g.force);
  std::map<std::string, QAItem> by_id;
  for (auto& item : harness::read_dataset(dataset)) by_id.emplace(item.id, std::move(item));
  std::vector<scoring::ItemScore> scores;
  std::size_t changed = 0;
  for (const auto& r : harness::read_records(records)) {
    const auto it = by_id.find(r.item_id);
    if (it == by_id.end()) throw Error(Errc::invalid_config, fmt::format("record item '{}' not in dataset", r.item_id));
    const auto parsed = scoring::parse_answer(r.task_kind, r.raw_response);
    auto s = scoring::score_item(it->second, parsed, scoring::ToleranceRule{tolerance});
    if (s.acc != r.acc || s.half != r.half || s.sr != r.sr) ++changed;
    scores.push_back(std::move(s));
  }
  const auto m = scoring::aggregate(scores);
  auto cell = [](const scoring::MetricCell& c) {
    return ordered_json{{"n", c.n}, {"acc", c.acc}, {"half_acc", c.half_acc}, {"sr", c.sr}};
  };
  ordered_json doc{{"tolerance", tolerance}, {"overall", cell(m.overall)}};
  for (const auto& [k, c] : m.per_level) doc["per_level"][std::string(to_string(k))] = cell(c);
  for (const auto& [k, c] : m.per_task) doc["per_task"][std::string(to_string(k))] = cell(c);
  doc["rescored_differently"] = changed;
  write_text(out, doc.dump(2) + "\n");
  log << fmt::format("score: {} records, acc {:.2f}%, half {:.2f}%, sr {:.2f}%, {} differ from the log\n",
                     m.overall.n, 100 * m.overall.acc, 100 * m.overall.half_acc, 100 * m.overall.sr, changed);
  return ok;
}

int cmd_report(const Globals& g, const std::vector<fs::path>& logs, std::ostream& log) {
  for (const char* ext : {".csv", ".json", ".txt"}) ensure_writable(g.out / (std::string("report") + ext), g.force);
  std::vector<harness::RunRecord> all;
  for (const auto& p : logs) {
    if (!fs::exists(p)) throw Error(Errc::invalid_config, fmt::format("record log '{}' not found", p.string()));
    auto part = harness::read_records(p);
    all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  const auto report = harness::make_report(all);
  write_reports(report, g.out / "report");
  log << harness::report_text(report);
  return ok;
}

std::vector<std::string> read_labels(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::invalid_config, fmt::format("cannot read labels '{}'", path.string()));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    out.push_back(line.substr(b, line.find_last_not_of(" \t\r") - b + 1));
  }
  return out;
}

int cmd_kappa(const Globals& g, const fs::path& a, const fs::path& b, std::ostream& log) {
  const fs::path out = g.out / "kappa.json";
  ensure_writable(out, g.force);
  const auto la = read_labels(a), lb = read_labels(b);
  const auto k = scoring::cohens_kappa(la, lb);
  ordered_json doc{{"n", la.size()},
                   {"kappa", k.value},
                   {"observed", k.observed},
                   {"expected", k.expected},
                   {"degenerate", k.degenerate}};
  write_text(out, doc.dump(2) + "\n");
  if (k.degenerate) log << "kappa: 1.0 by convention (both raters constant and equal)\n";
  else log << fmt::format("kappa: {:.4f} (observed {:.4f}, expected {:.4f}, n {})\n", k.value, k.observed, k.expected, la.size());
  return ok;
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::invalid_config:
    case Errc::strategy_rejected:
    case Errc::schema_violation:
    case Errc::unsupported_version:
      return config_error;
    case Errc::auth_failure:
    case Errc::rate_limited:
    case Errc::timeout:
    case Errc::transport:
      return endpoint_failed;
    default:
      return failure;
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& log) {
  CLI::App app{"Time-series reasoning benchmark: generate, render, evaluate and score."};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed for generation and sampling")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--config", g.config, "JSON run config (endpoint, limits)");
  app.add_flag("--force", g.force, "Overwrite existing outputs");

  std::vector<std::string> levels;
  double scale = 0.01;
  std::vector<std::string> counts;
  std::optional<double> gate;
  fs::path real_series;
  std::string describer = "template";
  bool no_render = false;
  auto* gen = app.add_subcommand("gen", "Generate a dataset, its images and a manifest");
  gen->add_option("--level", levels, "Levels (L1..L4) or task names; repeatable");
  gen->add_option("--scale", scale, "Fraction of the full per-task counts")->capture_default_str();
  gen->add_option("--count", counts, "Explicit count, task=N; repeatable");
  gen->add_option("--gate", gate, "Minimum verification pass rate");
  gen->add_option("--real-series", real_series, "JSONL of real series for semantic items");
  gen->add_option("--describer", describer, "Pattern describer: template or endpoint")->capture_default_str();
  gen->add_flag("--no-render", no_render, "Skip image rendering");

  fs::path dataset, assets;
  auto* rend = app.add_subcommand("render", "Render plots, grids and panels for a dataset");
  rend->add_option("--dataset", dataset, "Dataset JSONL (default <out>/dataset.jsonl)");
  rend->add_option("--assets", assets, "Image directory (default next to the dataset)");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Run an agent over a dataset");
  eval->add_option("--dataset", ea.dataset, "Dataset JSONL (default <out>/dataset.jsonl)");
  eval->add_option("--agent", ea.agent, "oracle, random[:seed], constant:X or endpoint")->required();
  eval->add_option("--strategy", ea.strategy, "Input encoding strategy");
  eval->add_option("--level", ea.levels, "Levels or task names to keep");
  eval->add_option("--records", ea.records, "Record log (default <out>/records.jsonl)");
  eval->add_flag("--resume", ea.resume, "Continue a partial record log");
  eval->add_option("--sample", ea.sample, "Seeded subsample size");
  eval->add_option("--stop-after", ea.stop_after, "Stop after this many new records");
  eval->add_option("--rate", ea.rate, "Requests per second (0: unlimited)");
  eval->add_option("--burst", ea.burst, "Token bucket burst");
  eval->add_option("--max-failures", ea.max_failures, "Consecutive failures before aborting");
  eval->add_option("--tolerance", ea.tolerance, "Value tolerance in printed decimals")->capture_default_str();

  fs::path score_records;
  double score_tol = 0.5;
  auto* score = app.add_subcommand("score", "Rescore a record log against its dataset");
  score->add_option("--dataset", dataset, "Dataset JSONL (default <out>/dataset.jsonl)");
  score->add_option("--records", score_records, "Record log")->required();
  score->add_option("--tolerance", score_tol, "Value tolerance in printed decimals")->capture_default_str();

  std::vector<fs::path> logs;
  auto* report = app.add_subcommand("report", "Tabulate one or more record logs");
  report->add_option("--records", logs, "Record logs")->required();

  fs::path rater_a, rater_b;
  auto* kappa = app.add_subcommand("kappa", "Cohen's kappa between two label files");
  kappa->add_option("--a", rater_a, "Labels of the first rater, one per line")->required();
  kappa->add_option("--b", rater_b, "Labels of the second rater, one per line")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream out, err;
    const int code = app.exit(e, out, err);
    log << out.str() << err.str();
    return code == 0 ? ok : config_error;
  }

  std::string command;
  for (int i = 1; i < argc; ++i) command += (i > 1 ? " " : "") + std::string(argv[i]);

  try {
    const FileConfig fc = load_config(g.config);
    if (*gen) return cmd_gen(g, fc, levels, scale, counts, gate, real_series, describer, no_render, command, log);
    if (*rend) return cmd_render(g, dataset, assets, log);
    if (*eval) return cmd_eval(g, fc, ea, log);
    if (*score) return cmd_score(g, dataset, score_records, score_tol, log);
    if (*report) return cmd_report(g, logs, log);
    if (*kappa) return cmd_kappa(g, rater_a, rater_b, log);
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return failure;
  }
  return failure;
}

}  // namespace tsbench::cli
