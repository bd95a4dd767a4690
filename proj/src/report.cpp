#include <fmt/format.h>
#include <map>
#include <nlohmann/json.hpp>
#include <set>

#include "tsbench/error.hpp"
#include "tsbench/harness.hpp"

namespace tsbench::harness {

using nlohmann::ordered_json;

Report make_report(std::span<const RunRecord> records) {
  if (records.empty()) throw Error(Errc::empty_run, "no run records to report on");
  std::map<std::pair<std::string, Strategy>, std::vector<scoring::ItemScore>> runs;
  std::set<TaskKind> tasks;
  for (const auto& r : records) {
    runs[{r.model, r.strategy}].push_back(r.score());
    tasks.insert(r.task_kind);
  }
  Report report;
  report.tasks.assign(tasks.begin(), tasks.end());
  for (const auto& [key, scores] : runs) {
    const auto m = scoring::aggregate(scores);
    report.rows.push_back({key.first, key.second, m.overall, m.per_task, m.per_level});
  }
  return report;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

ordered_json cell_json(const scoring::MetricCell& c) {
  return {{"n", c.n}, {"acc", c.acc}, {"half_acc", c.half_acc}, {"sr", c.sr}};
}

}  // namespace

std::string report_csv(const Report& report) {
  std::string out = "model,strategy,n,acc,half_acc,sr";
  for (TaskKind k : report.tasks) out += fmt::format(",{0}_n,{0}_acc,{0}_half_acc,{0}_sr", to_string(k));
  out += '\n';
  for (const auto& row : report.rows) {
    const auto& o = row.overall;
    out += fmt::format("{},{},{},{:.4f},{:.4f},{:.4f}", csv_field(row.model), to_string(row.strategy), o.n, o.acc,
                       o.half_acc, o.sr);
    for (TaskKind k : report.tasks) {
      const auto it = row.per_task.find(k);
      if (it == row.per_task.end()) out += ",,,,";
      else out += fmt::format(",{},{:.4f},{:.4f},{:.4f}", it->second.n, it->second.acc, it->second.half_acc, it->second.sr);
    }
    out += '\n';
  }
  return out;
}

std::string report_json(const Report& report) {
  ordered_json rows = ordered_json::array();
  for (const auto& row : report.rows) {
    ordered_json tasks = ordered_json::object(), levels = ordered_json::object();
    for (const auto& [k, c] : row.per_task) tasks[std::string(to_string(k))] = cell_json(c);
    for (const auto& [l, c] : row.per_level) levels[std::string(to_string(l))] = cell_json(c);
    rows.push_back({{"model", row.model},
                    {"strategy", std::string(to_string(row.strategy))},
                    {"overall", cell_json(row.overall)},
                    {"per_level", levels},
                    {"per_task", tasks}});
  }
  return ordered_json{{"rows", rows}}.dump(2);
}

std::string report_text(const Report& report) {
  std::size_t model_w = 5, strat_w = 8;
  for (const auto& row : report.rows) {
    model_w = std::max(model_w, row.model.size());
    strat_w = std::max(strat_w, to_string(row.strategy).size());
  }
  // Acc / half-Acc / SR in percent; "-" where a run has no items of that task.
  std::string head = fmt::format("{:<{}}  {:<{}}  {:>21}", "model", model_w, "strategy", strat_w, "overall");
  for (TaskKind k : report.tasks) head += fmt::format("  {:>21}", to_string(k));
  std::string out = head + '\n';
  auto cell = [](const scoring::MetricCell& c) {
    return fmt::format("{:>6.1f} {:>6.1f} {:>6.1f}", 100.0 * c.acc, 100.0 * c.half_acc, 100.0 * c.sr);
  };
  for (const auto& row : report.rows) {
    out += fmt::format("{:<{}}  {:<{}}  {:>21}", row.model, model_w, to_string(row.strategy), strat_w, cell(row.overall));
    for (TaskKind k : report.tasks) {
      const auto it = row.per_task.find(k);
      out += fmt::format("  {:>21}", it == row.per_task.end() ? std::string("-") : cell(it->second));
    }
    out += '\n';
  }
  out += "columns: Acc half-Acc SR (%)\n";
  return out;
}

}  // namespace tsbench::harness
