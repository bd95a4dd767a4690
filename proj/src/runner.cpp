#include <algorithm>
#include <condition_variable>
#include <fmt/format.h>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <thread>

#include "tsbench/error.hpp"
#include "tsbench/harness.hpp"

namespace tsbench::harness {

using nlohmann::json;
using nlohmann::ordered_json;

std::string RunRecord::key() const { return fmt::format("{}\x1f{}\x1f{}", item_id, to_string(strategy), model); }

scoring::ItemScore RunRecord::score() const { return {item_id, task_kind, acc, half, sr, notes}; }

std::string record_to_json(const RunRecord& r) {
  return ordered_json{{"item_id", r.item_id},
                      {"task_kind", std::string(tsbench::to_string(r.task_kind))},
                      {"strategy", std::string(to_string(r.strategy))},
                      {"model", r.model},
                      {"request_digest", r.request_digest},
                      {"prompt", r.prompt},
                      {"raw_response", r.raw_response},
                      {"parse_ok", r.parse_ok},
                      {"notes", r.notes},
                      {"acc", r.acc},
                      {"half", r.half},
                      {"sr", r.sr},
                      {"latency_ms", r.latency_ms},
                      {"attempts", r.attempts},
                      {"audit_ref", r.audit_ref}}
      .dump();
}

RunRecord record_from_json(std::string_view line) {
  try {
    const json doc = json::parse(line);
    RunRecord r;
    r.item_id = doc.at("item_id").get<std::string>();
    r.task_kind = task_kind_from_string(doc.at("task_kind").get<std::string>());
    r.strategy = strategy_from_string(doc.at("strategy").get<std::string>());
    r.model = doc.at("model").get<std::string>();
    r.request_digest = doc.at("request_digest").get<std::string>();
    r.prompt = doc.at("prompt").get<std::string>();
    r.raw_response = doc.at("raw_response").get<std::string>();
    r.parse_ok = doc.at("parse_ok").get<bool>();
    r.notes = doc.at("notes").get<std::vector<std::string>>();
    r.acc = doc.at("acc").get<bool>();
    r.half = doc.at("half").get<bool>();
    r.sr = doc.at("sr").get<bool>();
    r.latency_ms = doc.at("latency_ms").get<double>();
    r.attempts = doc.at("attempts").get<int>();
    r.audit_ref = doc.at("audit_ref").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw Error(Errc::schema_violation, fmt::format("run record: {}", e.what()));
  }
}

std::vector<RunRecord> read_records(const std::filesystem::path& path) {
  std::vector<RunRecord> out;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0, line_no = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    if (nl == std::string::npos) break;  // torn tail
    ++line_no;
    const std::string_view line(content.data() + pos, nl - pos);
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
      try {
        out.push_back(record_from_json(line));
      } catch (const Error& e) {
        throw Error(e.code(), fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
      }
    }
    pos = nl + 1;
  }
  return out;
}

TokenBucket::TokenBucket(double rate, double burst)
    : rate_(rate), burst_(std::max(1.0, burst)), tokens_(std::max(1.0, burst)), last_(std::chrono::steady_clock::now()) {
  if (rate < 0.0) throw Error(Errc::invalid_config, "rate must not be negative");
}

void TokenBucket::acquire() {
  if (rate_ == 0.0) return;
  std::unique_lock lock(mu_);
  while (true) {
    const auto now = std::chrono::steady_clock::now();
    tokens_ = std::min(burst_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
    last_ = now;
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    const auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
    lock.unlock();
    std::this_thread::sleep_for(wait);
    lock.lock();
  }
}

namespace {

/// Drops a partial final line left by a crash so appends start on a fresh line.
void repair_tail(const std::filesystem::path& path) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec || size == 0) return;
  std::ifstream in(path, std::ios::binary);
  const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (content.back() == '\n') return;
  const auto nl = content.rfind('\n');
  std::filesystem::resize_file(path, nl == std::string::npos ? 0 : nl + 1);
}

struct Outcome {
  std::optional<RunRecord> record;
  std::string error;
  Errc code = Errc::transport;
};

}  // namespace

RunResult run_eval(std::span<const QAItem> items, Agent& agent, const RunConfig& cfg) {
  if (cfg.records.empty()) throw Error(Errc::invalid_config, "run needs a record log path");
  for (const auto& item : items) {
    if (!supports(cfg.strategy, item.task_kind)) {
      throw Error(Errc::strategy_rejected, fmt::format("{} cannot carry {} items (item '{}')", to_string(cfg.strategy),
                                                       tsbench::to_string(item.task_kind), item.id));
    }
  }
  const std::string model = agent.model_id();

  RunResult result;
  std::set<std::string> done;
  if (cfg.resume) {
    repair_tail(cfg.records);
    for (auto& r : read_records(cfg.records)) {
      if (r.strategy != cfg.strategy || r.model != model) continue;
      if (done.insert(r.key()).second) result.records.push_back(std::move(r));
    }
  } else if (cfg.records.has_parent_path()) {
    std::filesystem::create_directories(cfg.records.parent_path());
  }
  std::set<std::string> in_dataset;
  for (const auto& item : items) in_dataset.insert(item.id);
  std::erase_if(result.records, [&](const RunRecord& r) { return !in_dataset.contains(r.item_id); });
  result.resumed = result.records.size();

  // Encode everything up front so a missing asset fails before any request goes out.
  std::vector<std::size_t> pending;
  std::vector<ModelRequest> requests;
  std::set<std::string> queued;
  for (std::size_t i = 0; i < items.size(); ++i) {
    RunRecord probe;
    probe.item_id = items[i].id;
    probe.strategy = cfg.strategy;
    probe.model = model;
    if (done.contains(probe.key()) || !queued.insert(probe.key()).second) continue;
    pending.push_back(i);
    requests.push_back(encode_instruction(cfg.strategy, items[i], cfg.assets_root));
  }

  std::ofstream log(cfg.records, cfg.resume ? std::ios::app | std::ios::binary : std::ios::trunc | std::ios::binary);
  if (!log) throw Error(Errc::io_error, fmt::format("cannot open record log '{}'", cfg.records.string()));

  TokenBucket bucket(cfg.rate_per_sec, cfg.burst);
  std::mutex mu;
  std::condition_variable ready;
  std::vector<std::optional<Outcome>> outcomes(pending.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};

  auto worker = [&] {
    while (!stop) {
      const std::size_t k = next++;
      if (k >= pending.size()) return;
      const QAItem& item = items[pending[k]];
      const ModelRequest& req = requests[k];
      Outcome out;
      try {
        bucket.acquire();
        const auto t0 = std::chrono::steady_clock::now();
        AgentReply reply = agent.answer(item, req);
        const double elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        const auto parsed = scoring::parse_answer(item.task_kind, reply.text);
        const auto score = scoring::score_item(item, parsed, cfg.tolerance);
        RunRecord r;
        r.item_id = item.id;
        r.task_kind = item.task_kind;
        r.strategy = cfg.strategy;
        r.model = model;
        r.prompt = req.to_json();
        r.request_digest = req.digest();
        r.raw_response = std::move(reply.text);
        r.parse_ok = parsed.parse_ok;
        r.notes = score.notes;
        r.acc = score.acc;
        r.half = score.half;
        r.sr = score.sr;
        r.latency_ms = reply.latency_ms > 0.0 ? reply.latency_ms : elapsed;
        r.attempts = reply.attempts;
        r.audit_ref = std::move(reply.audit_ref);
        out.record = std::move(r);
      } catch (const Error& e) {
        out.error = e.what();
        out.code = e.code();
      } catch (const std::exception& e) {
        out.error = e.what();
      }
      {
        std::lock_guard lock(mu);
        outcomes[k] = std::move(out);
      }
      ready.notify_all();
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(cfg.jobs, pending.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads && !pending.empty(); ++t) pool.emplace_back(worker);

  // Ordered commit: record k is written only after records 0..k-1.
  std::size_t consecutive_failures = 0;
  for (std::size_t k = 0; k < pending.size(); ++k) {
    Outcome out;
    {
      std::unique_lock lock(mu);
      ready.wait(lock, [&] { return outcomes[k].has_value(); });
      out = std::move(*outcomes[k]);
      outcomes[k].reset();
    }
    if (!out.record) {
      ++result.failed;
      if (++consecutive_failures >= std::max<std::size_t>(cfg.max_failures, 1)) {
        result.aborted = true;
        result.abort_reason = out.error;
        stop = true;
        break;
      }
      continue;
    }
    consecutive_failures = 0;
    log << record_to_json(*out.record) << '\n';
    log.flush();
    if (!log) throw Error(Errc::io_error, fmt::format("write to '{}' failed", cfg.records.string()));
    result.records.push_back(std::move(*out.record));
    ++result.executed;
    if (cfg.stop_after && result.executed >= *cfg.stop_after && k + 1 < pending.size()) {
      result.interrupted = true;
      stop = true;
      break;
    }
  }
  stop = true;
  for (auto& t : pool) t.join();

  if (!result.records.empty()) {
    std::vector<scoring::ItemScore> scores;
    for (const auto& r : result.records) scores.push_back(r.score());
    result.metrics = scoring::aggregate(scores);
  }
  return result;
}

}  // namespace tsbench::harness
