#include <catch2/catch_amalgamated.hpp>

#include <nlohmann/json.hpp>
#include <set>

#include "fixtures.hpp"
#include "mock_endpoint.hpp"
#include "tsbench/corpus.hpp"
#include "tsbench/error.hpp"
#include "tsbench/harness.hpp"

using namespace tsbench;
using namespace tsbench::corpus;

namespace {

std::string dump(const std::vector<QAItem>& items) {
  std::string out;
  for (const auto& i : items) out += harness::item_to_json(i) + "\n";
  return out;
}

}  // namespace

TEST_CASE("scaled counts") {
  CHECK(scaled_count(10000, 0.01) == 100);
  CHECK(scaled_count(16098, 0.01) == 161);
  CHECK(scaled_count(24605, 0.01) == 246);
  CHECK(scaled_count(4993, 1.0) == 4993);
  CHECK(scaled_count(5000, 0.0) == 0);
  CHECK_THROWS_AS(scaled_count(10, -1.0), Error);
  CHECK(quota(TaskKind::global_pattern).max_length == 1024);
}

TEST_CASE("default tasks") {
  BuildConfig cfg;
  const auto tasks = default_tasks(cfg);
  CHECK(std::find(tasks.begin(), tasks.end(), TaskKind::successor) == tasks.end());
  CHECK(std::find(tasks.begin(), tasks.end(), TaskKind::semantic) == tasks.end());
  CHECK(tasks.size() == 7);
}

TEST_CASE("one percent L1 and L2 corpus") {
  BuildConfig cfg;
  const auto c = build(cfg);
  CHECK(c.items.size() == 807);
  CHECK(c.gate_passed());
  std::set<std::string> ids;
  for (const auto& item : c.items) {
    CHECK(ids.insert(item.id).second);
    const auto& q = quota(item.task_kind);
    for (std::size_t k = 0; k < input_series_count(item); ++k) {
      CHECK(item.series[k].size() >= q.min_length);
      CHECK(item.series[k].size() <= q.max_length);
    }
    CHECK_NOTHROW(validate_item(item));
  }
  for (const auto& st : c.stats) {
    CHECK(st.complete());
    CHECK(st.pass_rate() >= 0.9);
  }
}

TEST_CASE("the corpus depends on the seed only") {
  BuildConfig a;
  a.counts = {{TaskKind::minmax, 20}, {TaskKind::numerical_perception, 20}, {TaskKind::global_pattern, 10}};
  a.tasks = {TaskKind::minmax, TaskKind::numerical_perception, TaskKind::global_pattern};
  auto b = a;
  b.jobs = 4;
  const auto one = dump(build(a).items);
  CHECK(one == dump(build(b).items));
  CHECK(one == dump(build(a).items));
  auto c = a;
  c.seed = 43;
  CHECK(one != dump(build(c).items));
}

TEST_CASE("successor items are opt-in and verified") {
  BuildConfig cfg;
  cfg.tasks = {TaskKind::successor};
  cfg.counts = {{TaskKind::successor, 15}};
  const auto c = build(cfg);
  REQUIRE(c.items.size() == 15);
  for (const auto& item : c.items) {
    CHECK(item.series.size() == 5);
    CHECK(item.series[0].size() == 96);
    CHECK(taskgen::verify_uniqueness(item).passed());
  }
}

TEST_CASE("semantic items through the mock endpoint") {
  tsbench::testing::MockEndpoint mock;
  llm::ChatClient client(mock.client_config());
  BuildConfig cfg;
  cfg.tasks = {TaskKind::semantic};
  cfg.counts = {{TaskKind::semantic, 12}};
  cfg.l3_client = &client;
  cfg.real_series = tsbench::testing::real_like_series(10, 3);
  const auto c = build(cfg);
  CHECK(c.items.size() == 12);
  CHECK(c.gate_passed());
  for (const auto& item : c.items) CHECK(item.level == Level::L3);
  const auto& st = c.stats.at(0);
  CHECK(st.held_out == c.held_out.size());

  BuildConfig none;
  none.tasks = {TaskKind::semantic};
  none.counts = {{TaskKind::semantic, 3}};
  CHECK_THROWS_AS(build(none), Error);
}

TEST_CASE("manifest") {
  BuildConfig cfg;
  cfg.tasks = {TaskKind::start_end};
  cfg.counts = {{TaskKind::start_end, 5}};
  const auto c = build(cfg);
  const auto m = nlohmann::json::parse(manifest_json(c, cfg));
  CHECK(m["seed"] == 42);
  CHECK(m["gate_passed"] == true);
  CHECK(m["generator_version"] == std::string(kGeneratorVersion));
  bool found = false;
  for (const auto& t : m["tasks"]) {
    if (t["task"] == "start_end") {
      found = true;
      CHECK(t["emitted"] == 5);
    }
  }
  CHECK(found);
}
