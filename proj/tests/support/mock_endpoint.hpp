#pragma once

// In-process chat-completions server for tests. The default handler plays an
// L3 generator (one max-value question per series), an examiner that accepts
// everything, and a model that answers "A".

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "tsbench/llm_bridge.hpp"

namespace tsbench::testing {

struct MockRequest {
  nlohmann::json body;
  std::string system;
  std::string user;
  std::size_t images = 0;
  std::string authorization;
};

struct MockReply {
  int status = 200;
  std::string content;
  std::chrono::milliseconds delay{0};
};

class MockEndpoint {
 public:
  MockEndpoint();
  ~MockEndpoint();
  MockEndpoint(const MockEndpoint&) = delete;
  MockEndpoint& operator=(const MockEndpoint&) = delete;

  std::string base_url() const;
  /// Client settings pointing here: no credential, short backoff.
  llm::ClientConfig client_config(std::string model = "mock-model") const;

  /// Replaces the default behaviour.
  void set_handler(std::function<MockReply(const MockRequest&)> handler);
  /// The next `count` requests get `status` before the handler runs again.
  void fail_next(int status, int count);

  std::size_t request_count() const { return count_.load(); }
  std::vector<MockRequest> requests() const;

  /// The default handler, usable from custom handlers.
  static MockReply default_reply(const MockRequest& request);
  /// The L3 item the default generator writes for these values.
  static std::string l3_reply(const std::vector<double>& values, const std::string& scenario);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::atomic<std::size_t> count_{0};
};

}  // namespace tsbench::testing
