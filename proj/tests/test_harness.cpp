#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "mock_endpoint.hpp"
#include "tsbench/error.hpp"
#include "tsbench/harness.hpp"
#include "tsbench/synth.hpp"
#include "tsbench/taskgen.hpp"

using namespace tsbench;
using namespace tsbench::harness;
using tsbench::testing::make_series;
using tsbench::testing::scratch_dir;

namespace {

QAItem tiny_minmax() {
  QAItem item;
  item.id = "minmax-tiny";
  item.series = {make_series("t", {1.5, 2.0, 0.25})};
  item.question = "Which is the max?";
  item.key = MinMaxKey{{1, PrintedValue::of(2.0)}, {2, PrintedValue::of(0.25)}, features::ExtremaOrder::max_first};
  return item;
}

std::vector<QAItem> mixed_items(std::size_t n) {
  std::vector<QAItem> out;
  for (std::uint64_t seed = 0; out.size() < n; ++seed) {
    auto s = synth::synthesize(synth::sample_spec(seed, 64 + seed % 100)).series;
    s.id = "h" + std::to_string(seed);
    auto g = seed % 2 ? taskgen::gen_minmax(s, seed) : taskgen::gen_numerical_perception(s, seed);
    if (!g) continue;
    g.item->id = "item-" + std::to_string(seed);
    out.push_back(*g.item);
  }
  return out;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return Errc::io_error;
}

std::multiset<std::string> keys_of(const std::vector<RunRecord>& records) {
  std::multiset<std::string> out;
  for (const auto& r : records) out.insert(r.key());
  return out;
}

/// Throws on every request after the first `ok` ones.
class FlakyAgent final : public Agent {
 public:
  explicit FlakyAgent(std::size_t ok) : ok_(ok) {}
  std::string model_id() const override { return "flaky"; }
  AgentReply answer(const QAItem& item, const ModelRequest& req) override {
    if (calls_++ >= ok_) throw Error(Errc::transport, "connection reset");
    return OracleAgent().answer(item, req);
  }

 private:
  std::size_t ok_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace

TEST_CASE("text encodings") {
  const auto item = tiny_minmax();
  CHECK(encode_instruction(Strategy::text_no_index, item).text ==
        "Given the time series data:\n\n[1.50000, 2.00000, 0.25000],\n\nWhich is the max?");
  CHECK(encode_instruction(Strategy::text_with_index, item).text ==
        "Given the time series data (element format[index,value]), start from T = 0:\n\n"
        "[[0,1.50000], [1,2.00000], [2,0.25000]],\n\nWhich is the max?");
  CHECK(serialize_values(std::vector<double>{123.4567}) == "[123.457]");

  auto two = item;
  two.series.push_back(make_series("u", {3.0, 4.0}));
  CHECK(encode_instruction(Strategy::text_no_index, two).text ==
        "Given the time series data:\n\nTime Series 1: [1.50000, 2.00000, 0.25000]\n\nTime Series 2: [3.00000, 4.00000],"
        "\n\nWhich is the max?");
}

TEST_CASE("vision encodings attach images in order") {
  auto item = tiny_minmax();
  CHECK(code_of([&] { encode_instruction(Strategy::vision_plus_text_no_index, item); }) == Errc::encoding_error);
  item.assets = {{"plot", "p.png"}, {"grid", "g.png"}, {"grid.2", "g2.png"}};
  const auto num = encode_instruction(Strategy::vision_plot_num, item, "/data");
  REQUIRE(num.images.size() == 3);
  CHECK(num.images[0].path == "/data/p.png");
  CHECK(num.images[2].path == "/data/g2.png");
  CHECK(num.text.find("Numerical Grid") != std::string::npos);
  CHECK(num.text.ends_with("Which is the max?"));
  const auto both = encode_instruction(Strategy::vision_plus_text_with_index, item);
  CHECK(both.images.size() == 1);
  CHECK(both.text.find("[[0,1.50000]") != std::string::npos);
}

TEST_CASE("a plot alone is rejected for exact read-out tasks") {
  auto item = tiny_minmax();
  item.assets = {{"plot", "p.png"}};
  CHECK(code_of([&] { encode_instruction(Strategy::vision_plot, item); }) == Errc::strategy_rejected);
  CHECK_FALSE(supports(Strategy::vision_plot, TaskKind::subseries_localize));
  CHECK(supports(Strategy::vision_plot, TaskKind::global_pattern));
  CHECK(supports(Strategy::vision_plot_num, TaskKind::minmax));
  CHECK(code_of([] { strategy_from_string("vision"); }) == Errc::invalid_config);
}

TEST_CASE("request digest covers text and images") {
  auto item = tiny_minmax();
  const auto a = encode_instruction(Strategy::text_no_index, item);
  CHECK(a.digest() == encode_instruction(Strategy::text_no_index, item).digest());
  CHECK(a.digest().size() == 64);
  item.question += " ";
  CHECK(a.digest() != encode_instruction(Strategy::text_no_index, item).digest());
}

TEST_CASE("dataset lines round trip") {
  const auto items = mixed_items(30);
  const auto dir = scratch_dir("harness_dataset");
  write_dataset(dir / "d.jsonl", items);
  const auto back = read_dataset(dir / "d.jsonl");
  REQUIRE(back.size() == items.size());
  for (std::size_t i = 0; i < items.size(); ++i) CHECK(back[i] == items[i]);
  CHECK(item_to_json(back[3]) == item_to_json(items[3]));
}

TEST_CASE("dataset errors name the line and field") {
  const auto dir = scratch_dir("harness_bad");
  const auto good = item_to_json(mixed_items(1)[0]);
  {
    std::ofstream out(dir / "bad.jsonl");
    out << good << "\n{\"schema_version\": 1}\n";
  }
  try {
    (void)read_dataset(dir / "bad.jsonl");
    FAIL("bad dataset read");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::schema_violation);
    CHECK(std::string(e.what()).find("bad.jsonl:2") != std::string::npos);
  }
  auto doc = nlohmann::json::parse(good);
  doc["schema_version"] = 99;
  CHECK(code_of([&] { item_from_json(doc.dump()); }) == Errc::unsupported_version);
  doc = nlohmann::json::parse(good);
  doc.erase("question");
  CHECK(code_of([&] { item_from_json(doc.dump()); }) == Errc::schema_violation);
  CHECK(code_of([] { item_from_json("not json"); }) == Errc::schema_violation);
}

TEST_CASE("subsample is seeded and keeps order") {
  const auto items = mixed_items(40);
  const auto a = subsample(items, 10, 3);
  CHECK(a.size() == 10);
  CHECK(a == subsample(items, 10, 3));
  for (std::size_t i = 1; i < a.size(); ++i) {
    const auto pos = [&](const QAItem& x) { return std::find(items.begin(), items.end(), x) - items.begin(); };
    CHECK(pos(a[i - 1]) < pos(a[i]));
  }
  CHECK(subsample(items, 100, 3).size() == 40);
}

TEST_CASE("scripted agents") {
  CHECK(make_scripted_agent("oracle")->model_id() == "oracle");
  CHECK(make_scripted_agent("random:9")->model_id() == "random:9");
  CHECK(make_scripted_agent("constant:c")->model_id() == "constant:C");
  CHECK(code_of([] { make_scripted_agent("constant:Q"); }) == Errc::invalid_config);
  CHECK(code_of([] { make_scripted_agent("gpt"); }) == Errc::invalid_config);
}

TEST_CASE("oracle run scores full marks and records every item") {
  const auto items = mixed_items(40);
  const auto dir = scratch_dir("harness_oracle");
  RunConfig cfg;
  cfg.records = dir / "records.jsonl";
  OracleAgent oracle;
  const auto r = run_eval(items, oracle, cfg);
  CHECK(r.executed == 40);
  REQUIRE(r.metrics);
  CHECK(r.metrics->overall.acc == 1.0);
  CHECK(r.metrics->overall.half_acc == 1.0);
  CHECK(r.metrics->overall.sr == 1.0);
  const auto logged = read_records(cfg.records);
  CHECK(logged.size() == 40);
  // Ordered commit: the log follows dataset order.
  for (std::size_t i = 0; i < 40; ++i) CHECK(logged[i].item_id == items[i].id);
  CHECK(record_to_json(record_from_json(record_to_json(logged[5]))) == record_to_json(logged[5]));

  // A second run resumes everything and executes nothing.
  const auto again = run_eval(items, oracle, cfg);
  CHECK(again.executed == 0);
  CHECK(again.resumed == 40);
}

TEST_CASE("stop and resume give the same record multiset") {
  const auto items = mixed_items(60);
  const auto dir = scratch_dir("harness_resume");
  RandomAgent agent(5);

  RunConfig full;
  full.records = dir / "full.jsonl";
  full.resume = false;
  const auto whole = run_eval(items, agent, full);

  RunConfig part;
  part.records = dir / "part.jsonl";
  part.stop_after = 30;
  part.jobs = 3;
  const auto first = run_eval(items, agent, part);
  CHECK(first.interrupted);
  CHECK(first.executed == 30);
  // Simulate a crash mid-write.
  {
    std::ofstream torn(part.records, std::ios::app);
    torn << "{\"item_id\": \"item-";
  }
  part.stop_after.reset();
  const auto second = run_eval(items, agent, part);
  CHECK(second.resumed == 30);
  CHECK(second.executed == 30);
  CHECK(keys_of(read_records(part.records)) == keys_of(read_records(full.records)));
  CHECK(second.metrics->overall.acc == whole.metrics->overall.acc);
}

TEST_CASE("consecutive failures abort the run") {
  const auto items = mixed_items(20);
  const auto dir = scratch_dir("harness_abort");
  RunConfig cfg;
  cfg.records = dir / "r.jsonl";
  cfg.jobs = 1;
  cfg.max_failures = 3;
  FlakyAgent agent(5);
  const auto r = run_eval(items, agent, cfg);
  CHECK(r.aborted);
  CHECK(r.executed == 5);
  CHECK(r.failed == 3);
  CHECK(r.abort_reason.find("connection reset") != std::string::npos);
  CHECK(read_records(cfg.records).size() == 5);
}

TEST_CASE("endpoint agent sends the encoded text without leaking credentials") {
  tsbench::testing::MockEndpoint mock;
  auto cfg = mock.client_config();
  cfg.api_key_env = "TSBENCH_HARNESS_KEY";
  ::setenv("TSBENCH_HARNESS_KEY", "sk-secret-harness", 1);
  llm::ChatClient client(cfg);
  EndpointAgent agent(client);
  const auto items = mixed_items(6);
  const auto dir = scratch_dir("harness_endpoint");
  RunConfig rc;
  rc.records = dir / "r.jsonl";
  const auto r = run_eval(items, agent, rc);
  CHECK(r.executed == 6);
  CHECK(mock.request_count() == 6);
  const auto reqs = mock.requests();
  CHECK(std::any_of(reqs.begin(), reqs.end(), [](const auto& q) { return q.user.starts_with("Given the time series data"); }));
  CHECK(tsbench::testing::read_file(rc.records).find("sk-secret-harness") == std::string::npos);
  CHECK(r.records.front().model == "mock-model");
}

TEST_CASE("strategy rejection happens before any request") {
  tsbench::testing::MockEndpoint mock;
  llm::ChatClient client(mock.client_config());
  EndpointAgent agent(client);
  const auto items = mixed_items(4);
  RunConfig rc;
  rc.records = scratch_dir("harness_reject") / "r.jsonl";
  rc.strategy = Strategy::vision_plot;
  CHECK(code_of([&] { run_eval(items, agent, rc); }) == Errc::strategy_rejected);
  CHECK(mock.request_count() == 0);
}

TEST_CASE("report tables") {
  std::vector<RunRecord> recs;
  auto add = [&](std::string id, TaskKind k, std::string model, bool acc, bool half, bool sr) {
    RunRecord r;
    r.item_id = std::move(id);
    r.task_kind = k;
    r.model = std::move(model);
    r.acc = acc;
    r.half = half;
    r.sr = sr;
    recs.push_back(r);
  };
  add("a", TaskKind::minmax, "m1", true, true, true);
  add("b", TaskKind::minmax, "m1", false, true, true);
  add("c", TaskKind::successor, "m1", false, false, true);
  add("a", TaskKind::minmax, "m2", true, true, true);
  const auto rep = make_report(recs);
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.tasks == std::vector<TaskKind>{TaskKind::minmax, TaskKind::successor});
  CHECK(rep.rows[0].overall.acc == Catch::Approx(1.0 / 3.0));
  const auto csv = report_csv(rep);
  CHECK(csv.starts_with("model,strategy,n,acc,half_acc,sr,minmax_n,minmax_acc,minmax_half_acc,minmax_sr,successor_n,"));
  CHECK(csv.find("m1,text_no_index,3,0.3333,0.6667,1.0000,2,0.5000,1.0000,1.0000,1,0.0000,0.0000,1.0000") != std::string::npos);
  CHECK(csv.find("m2,text_no_index,1,1.0000,1.0000,1.0000,1,1.0000,1.0000,1.0000,,,,") != std::string::npos);
  const auto js = nlohmann::json::parse(report_json(rep));
  CHECK(js["rows"][1]["per_task"]["minmax"]["n"] == 1);
  CHECK(report_text(rep).find("m2") != std::string::npos);
  CHECK(code_of([] { make_report(std::span<const RunRecord>{}); }) == Errc::empty_run);
}
