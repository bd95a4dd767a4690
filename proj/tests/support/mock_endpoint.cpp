#include "mock_endpoint.hpp"

#include <httplib.h>

#include <fmt/format.h>
#include <thread>

#include "tsbench/rng.hpp"

namespace tsbench::testing {

using nlohmann::json;

struct MockEndpoint::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  mutable std::mutex mu;
  std::function<MockReply(const MockRequest&)> handler = &MockEndpoint::default_reply;
  int fail_status = 0;
  int fail_left = 0;
  std::vector<MockRequest> log;
};

namespace {

MockRequest decode(const httplib::Request& req) {
  MockRequest out;
  out.body = json::parse(req.body);
  out.authorization = req.get_header_value("Authorization");
  for (const auto& msg : out.body.at("messages")) {
    const std::string role = msg.at("role");
    const json& content = msg.at("content");
    std::string text;
    if (content.is_string()) {
      text = content.get<std::string>();
    } else {
      for (const auto& part : content) {
        if (part.at("type") == "image_url") ++out.images;
        else text += part.at("text").get<std::string>();
      }
    }
    (role == "system" ? out.system : out.user) += text;
  }
  return out;
}

std::string line_after(const std::string& text, std::string_view marker) {
  const auto at = text.find(marker);
  if (at == std::string::npos) return {};
  const auto start = text.find('\n', at) + 1;
  return text.substr(start, text.find('\n', start) - start);
}

}  // namespace

MockEndpoint::MockEndpoint() : impl_(std::make_unique<Impl>()) {
  impl_->server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
    ++count_;
    MockRequest request;
    try {
      request = decode(req);
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(e.what(), "text/plain");
      return;
    }
    std::function<MockReply(const MockRequest&)> handler;
    int forced = 0;
    {
      std::lock_guard lock(impl_->mu);
      impl_->log.push_back(request);
      if (impl_->fail_left > 0) {
        --impl_->fail_left;
        forced = impl_->fail_status;
      }
      handler = impl_->handler;
    }
    if (forced) {
      res.status = forced;
      res.set_content("{\"error\":\"injected\"}", "application/json");
      return;
    }
    const MockReply reply = handler(request);
    if (reply.delay.count() > 0) std::this_thread::sleep_for(reply.delay);
    res.status = reply.status;
    if (reply.status != 200) {
      res.set_content(reply.content, "text/plain");
      return;
    }
    const json body = {{"id", "mock"},
                       {"object", "chat.completion"},
                       {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", reply.content}}}}}},
                       {"usage", {{"prompt_tokens", request.user.size() / 4}, {"completion_tokens", reply.content.size() / 4}}}};
    res.set_content(body.dump(), "application/json");
  });
  impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

MockEndpoint::~MockEndpoint() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string MockEndpoint::base_url() const { return fmt::format("http://127.0.0.1:{}", impl_->port); }

llm::ClientConfig MockEndpoint::client_config(std::string model) const {
  llm::ClientConfig cfg;
  cfg.base_url = base_url();
  cfg.model = std::move(model);
  cfg.api_key_env.clear();
  cfg.backoff = std::chrono::milliseconds(1);
  cfg.timeout = std::chrono::seconds(10);
  return cfg;
}

void MockEndpoint::set_handler(std::function<MockReply(const MockRequest&)> handler) {
  std::lock_guard lock(impl_->mu);
  impl_->handler = std::move(handler);
}

void MockEndpoint::fail_next(int status, int count) {
  std::lock_guard lock(impl_->mu);
  impl_->fail_status = status;
  impl_->fail_left = count;
}

std::vector<MockRequest> MockEndpoint::requests() const {
  std::lock_guard lock(impl_->mu);
  return impl_->log;
}

std::string MockEndpoint::l3_reply(const std::vector<double>& values, const std::string& scenario) {
  std::size_t top = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[top]) top = i;
  }
  const double peak = values[top];
  const std::size_t wrong_index = (top + values.size() / 2) % values.size();

  struct Choice {
    std::string text, evaluation, error;
  };
  std::vector<Choice> choices{
      {fmt::format("The {} readings reach their highest value of about {:.3f} at index {}.", scenario, peak, top),
       fmt::format("Scanning all points, the maximum is {:.3f} at index {}.", peak, top), "none"},
      {fmt::format("The {} readings repeat exactly every 3 steps and peak at about {:.3f}.", scenario, peak),
       "No exact 3-step repetition exists in the data.", "Pattern"},
      {fmt::format("The {} readings peak at about {:.3f} at index {}.", scenario, peak * 2.0 + 1.0, wrong_index),
       fmt::format("The value at index {} is {:.3f}, not the stated peak.", wrong_index, values[wrong_index]), "Value"},
      {fmt::format("The {} readings were taken every nanosecond by a household thermostat.", scenario),
       "The sampling claim is physically implausible for this source.", "Semantic"},
  };
  // Rotate so the correct option lands on a letter fixed by the data.
  std::string key_text;
  for (double v : values) key_text += fmt::format("{};", v);
  const std::size_t shift = fnv1a64(key_text) % 4;
  std::rotate(choices.begin(), choices.begin() + static_cast<std::ptrdiff_t>((4 - shift) % 4), choices.end());

  json options = json::object(), cot = json::object();
  char answer = 'A';
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string letter(1, static_cast<char>('A' + i));
    options[letter] = choices[i].text;
    cot[letter] = {{"evaluation", choices[i].evaluation}, {"error type", choices[i].error}};
    if (choices[i].error == "none") answer = letter[0];
  }
  const json doc = {{"question", "Which statement about the series is accurate?"},
                    {"options", options},
                    {"chain of thought", cot},
                    {"final verification", {{"checked values", {{top, peak}}}, {"neighbor consistency", true}}},
                    {"Final answer", std::string(1, answer)}};
  return doc.dump();
}

MockReply MockEndpoint::default_reply(const MockRequest& request) {
  MockReply reply;
  if (request.user.find("Now output ONLY the JSON.") != std::string::npos) {
    const std::string array = line_after(request.user, "element format: [index,value]):");
    std::vector<double> values;
    for (const auto& pair : json::parse(array)) values.push_back(pair.at(1).get<double>());
    std::string scenario = "sensor";
    const auto at = request.user.find("true scenario: ");
    if (at != std::string::npos) {
      const auto start = at + 15;
      scenario = request.user.substr(start, request.user.find('\n', start) - start);
    }
    reply.content = l3_reply(values, scenario);
  } else if (request.user.find("<input-data>\ntimeseries:") != std::string::npos) {
    reply.content = "\"valid\": \"true\", \"reason\": All analyses are correct.";
  } else if (request.system.find("Question Examiner") != std::string::npos) {
    reply.content = "\"valid\": \"true\", \"reason\": All analyses are correct.";
  } else {
    reply.content = "The correct answer is A";
  }
  return reply;
}

}  // namespace tsbench::testing
