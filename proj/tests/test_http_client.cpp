#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "mock_endpoint.hpp"
#include "tsbench/error.hpp"
#include "tsbench/llm_bridge.hpp"

using namespace tsbench;
using namespace tsbench::llm;
using tsbench::testing::MockEndpoint;
using tsbench::testing::MockReply;
using tsbench::testing::MockRequest;

namespace {

PromptBundle hello() {
  PromptBundle b;
  b.system_text = "You answer tersely.";
  b.user_text = "Say hi.";
  return b;
}

std::size_t line_count(const std::filesystem::path& p) {
  const auto text = tsbench::testing::read_file(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_CASE("canned reply with one audit record") {
  MockEndpoint mock;
  mock.set_handler([](const MockRequest&) { return MockReply{200, "hi", {}}; });
  auto cfg = mock.client_config();
  cfg.audit_log = tsbench::testing::scratch_dir("http_canned") / "audit.jsonl";
  ChatClient client(cfg);
  const auto c = client.complete(hello());
  CHECK(c.text == "hi");
  CHECK(c.usage.attempts == 1);
  CHECK(line_count(cfg.audit_log) == 1);
  const auto rec = nlohmann::json::parse(tsbench::testing::read_file(cfg.audit_log));
  CHECK(rec["status"] == 200);
  CHECK(rec["user"] == "Say hi.");
  CHECK(rec["request_sha256"].get<std::string>().size() == 64);
  CHECK(c.usage.audit_ref.ends_with("#1"));

  const auto reqs = mock.requests();
  REQUIRE(reqs.size() == 1);
  CHECK(reqs[0].system == "You answer tersely.");
  CHECK(reqs[0].body["model"] == "mock-model");
  CHECK(reqs[0].authorization.empty());
}

TEST_CASE("429 twice then success retries with an audit line per attempt") {
  MockEndpoint mock;
  mock.fail_next(429, 2);
  auto cfg = mock.client_config();
  cfg.audit_log = tsbench::testing::scratch_dir("http_retry") / "audit.jsonl";
  const auto c = request_completion(cfg, hello());
  CHECK(c.text == "The correct answer is A");
  CHECK(c.usage.attempts == 3);
  CHECK(mock.request_count() == 3);
  CHECK(line_count(cfg.audit_log) == 3);
}

TEST_CASE("persistent 429 exhausts retries") {
  MockEndpoint mock;
  mock.fail_next(429, 100);
  auto cfg = mock.client_config();
  cfg.max_retries = 2;
  try {
    (void)request_completion(cfg, hello());
    FAIL("rate limit swallowed");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::rate_limited);
  }
  CHECK(mock.request_count() == 3);
}

TEST_CASE("401 is not retried") {
  MockEndpoint mock;
  mock.fail_next(401, 5);
  try {
    (void)request_completion(mock.client_config(), hello());
    FAIL("auth failure swallowed");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::auth_failure);
  }
  CHECK(mock.request_count() == 1);
}

TEST_CASE("credential comes from the environment and is sent as a bearer token") {
  MockEndpoint mock;
  auto cfg = mock.client_config();
  cfg.api_key_env = "TSBENCH_TEST_KEY_ABSENT";
  ::unsetenv("TSBENCH_TEST_KEY_ABSENT");
  try {
    (void)request_completion(cfg, hello());
    FAIL("missing key accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::auth_failure);
  }
  CHECK(mock.request_count() == 0);

  cfg.api_key_env = "TSBENCH_TEST_KEY";
  ::setenv("TSBENCH_TEST_KEY", "sk-test-123", 1);
  cfg.audit_log = tsbench::testing::scratch_dir("http_key") / "audit.jsonl";
  (void)request_completion(cfg, hello());
  CHECK(mock.requests().at(0).authorization == "Bearer sk-test-123");
  CHECK(tsbench::testing::read_file(cfg.audit_log).find("sk-test-123") == std::string::npos);
}

TEST_CASE("slow replies time out") {
  MockEndpoint mock;
  mock.set_handler([](const MockRequest&) { return MockReply{200, "late", std::chrono::milliseconds(1500)}; });
  auto cfg = mock.client_config();
  cfg.timeout = std::chrono::milliseconds(200);
  cfg.max_retries = 0;
  try {
    (void)request_completion(cfg, hello());
    FAIL("timeout swallowed");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::timeout);
  }
}

TEST_CASE("images travel as data URIs") {
  const auto dir = tsbench::testing::scratch_dir("http_image");
  {
    std::ofstream png(dir / "x.png", std::ios::binary);
    png << "\x89PNG fake";
  }
  MockEndpoint mock;
  auto bundle = hello();
  bundle.images.push_back({(dir / "x.png").string()});
  (void)request_completion(mock.client_config(), bundle);
  const auto req = mock.requests().at(0);
  CHECK(req.images == 1);
  CHECK(req.user == "Say hi.");
  CHECK(request_body(mock.client_config(), bundle).find("data:image/png;base64,") != std::string::npos);
}

TEST_CASE("an L3 item through generator and examiner") {
  MockEndpoint mock;
  auto cfg = mock.client_config();
  cfg.audit_log = tsbench::testing::scratch_dir("http_l3") / "audit.jsonl";
  ChatClient client(cfg);
  const auto sources = tsbench::testing::real_like_series(4, 7);
  int routed = 0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto out = generate_l3_item(client, sources[seed % 4], seed);
    INFO(out.detail);
    REQUIRE((out.route == L3Outcome::Route::accepted || out.route == L3Outcome::Route::held_out));
    REQUIRE(out.item);
    CHECK_NOTHROW(validate_item(*out.item));
    CHECK(out.item->provenance.extra.at("generator_audit").find("#") != std::string::npos);
    CHECK(out.item->series.at(0).source == SeriesSource::real_crop);
    ++routed;
  }
  CHECK(routed == 8);
  CHECK(mock.request_count() == 16);

  mock.set_handler([](const MockRequest& r) {
    if (r.system.find("Question Examiner") != std::string::npos) return MockReply{200, "\"valid\": \"false\", \"reason\": B is wrong.", {}};
    return MockEndpoint::default_reply(r);
  });
  const auto rejected = generate_l3_item(client, sources[0], 1);
  CHECK(rejected.route == L3Outcome::Route::rejected);
  CHECK(rejected.detail == "B is wrong.");

  mock.set_handler([](const MockRequest&) { return MockReply{200, "I cannot do that.", {}}; });
  CHECK(generate_l3_item(client, sources[0], 1).route == L3Outcome::Route::quarantined);
}
