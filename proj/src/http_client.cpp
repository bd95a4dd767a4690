#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <openssl/evp.h>
#include <openssl/sha.h>

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <fmt/format.h>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "tsbench/error.hpp"
#include "tsbench/llm_bridge.hpp"

namespace tsbench::llm {

using json = nlohmann::json;

AuditLog::AuditLog(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ifstream in(path_);
  std::string line;
  while (std::getline(in, line)) ++lines_;
}

std::string AuditLog::append(const std::string& json_line) {
  std::lock_guard lock(mu_);
  std::ofstream out(path_, std::ios::app);
  if (!out) throw Error(Errc::io_error, fmt::format("cannot append to audit log '{}'", path_.string()));
  out << json_line << '\n';
  out.flush();
  return fmt::format("{}#{}", path_.string(), ++lines_);
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, fmt::format("cannot read image '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string base64(const std::string& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string sha256_hex(const std::string& text) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(text.data()), text.size(), digest);
  std::string out;
  for (unsigned char c : digest) out += fmt::format("{:02x}", c);
  return out;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string request_body(const ClientConfig& cfg, const PromptBundle& bundle) {
  json messages = json::array();
  if (!bundle.system_text.empty()) messages.push_back({{"role", "system"}, {"content", bundle.system_text}});
  if (bundle.images.empty()) {
    messages.push_back({{"role", "user"}, {"content", bundle.user_text}});
  } else {
    // Images lead, as the <image> markers do in the prompt templates.
    json content = json::array();
    for (const auto& img : bundle.images) {
      const std::string url = cfg.image_mode == ImageMode::data_uri
                                  ? fmt::format("data:{};base64,{}", img.mime, base64(read_file(img.path)))
                                  : "file://" + std::filesystem::absolute(img.path).string();
      content.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
    }
    content.push_back({{"type", "text"}, {"text", bundle.user_text}});
    messages.push_back({{"role", "user"}, {"content", content}});
  }
  json body = {{"model", cfg.model},
               {"messages", messages},
               {"temperature", cfg.temperature},
               {"max_tokens", cfg.max_tokens}};
  return body.dump();
}

struct ChatClient::Impl {
  std::unique_ptr<AuditLog> audit;
  std::mutex mu;
  std::condition_variable cv;
  std::size_t in_flight = 0;
};

ChatClient::ChatClient(ClientConfig cfg) : cfg_(std::move(cfg)), impl_(std::make_unique<Impl>()) {
  if (cfg_.base_url.empty()) throw Error(Errc::invalid_config, "endpoint base_url is empty");
  if (cfg_.model.empty()) throw Error(Errc::invalid_config, "endpoint model is empty");
  if (cfg_.max_in_flight == 0) throw Error(Errc::invalid_config, "max_in_flight must be positive");
  if (cfg_.max_retries < 0) throw Error(Errc::invalid_config, "max_retries must not be negative");
  if (!cfg_.audit_log.empty()) impl_->audit = std::make_unique<AuditLog>(cfg_.audit_log);
}

ChatClient::~ChatClient() = default;

Completion ChatClient::complete(const PromptBundle& bundle) {
  {
    std::unique_lock lock(impl_->mu);
    impl_->cv.wait(lock, [&] { return impl_->in_flight < cfg_.max_in_flight; });
    ++impl_->in_flight;
  }
  struct Release {
    Impl& impl;
    ~Release() {
      {
        std::lock_guard lock(impl.mu);
        --impl.in_flight;
      }
      impl.cv.notify_one();
    }
  } release{*impl_};

  const std::string body = request_body(cfg_, bundle);
  const std::string body_hash = sha256_hex(body);
  httplib::Headers headers;
  if (!cfg_.api_key_env.empty()) {
    const char* key = std::getenv(cfg_.api_key_env.c_str());
    if (!key || !*key) throw Error(Errc::auth_failure, fmt::format("credential variable {} is not set", cfg_.api_key_env));
    headers.emplace("Authorization", fmt::format("Bearer {}", key));
  }

  httplib::Client http(cfg_.base_url);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
  http.set_connection_timeout(secs.count(), usecs.count());
  http.set_read_timeout(secs.count(), usecs.count());
  http.set_write_timeout(secs.count(), usecs.count());

  Completion result;
  auto delay = cfg_.backoff;
  Errc last_code = Errc::transport;
  std::string last_message;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(delay.count()) * cfg_.backoff_factor));
    }
    const auto t0 = std::chrono::steady_clock::now();
    auto res = http.Post(cfg_.path, headers, body, "application/json");
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.usage.attempts = attempt + 1;
    result.usage.latency_ms += ms;

    json record = {{"time", timestamp()},
                   {"model", cfg_.model},
                   {"template", std::string(to_string(bundle.template_id))},
                   {"template_version", bundle.template_version},
                   {"request_sha256", body_hash},
                   {"system", bundle.system_text},
                   {"user", bundle.user_text},
                   {"attempt", attempt + 1},
                   {"latency_ms", ms}};
    bool retry = false;
    std::optional<std::string> text;
    if (!res) {
      const auto err = res.error();
      last_code = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ? Errc::timeout : Errc::transport;
      last_message = httplib::to_string(err);
      record["error"] = last_message;
      retry = true;
    } else {
      record["status"] = res->status;
      record["response"] = res->body;
      if (res->status == 401 || res->status == 403) {
        last_code = Errc::auth_failure;
        last_message = fmt::format("HTTP {}", res->status);
      } else if (res->status == 429) {
        last_code = Errc::rate_limited;
        last_message = "HTTP 429";
        retry = true;
      } else if (res->status >= 500) {
        last_code = Errc::transport;
        last_message = fmt::format("HTTP {}", res->status);
        retry = true;
      } else if (res->status != 200) {
        last_code = Errc::transport;
        last_message = fmt::format("HTTP {}", res->status);
      } else {
        try {
          const json doc = json::parse(res->body);
          text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
          if (doc.contains("usage")) {
            result.usage.prompt_tokens = doc["usage"].value("prompt_tokens", 0);
            result.usage.completion_tokens = doc["usage"].value("completion_tokens", 0);
          }
        } catch (const json::exception& e) {
          last_code = Errc::transport;
          last_message = fmt::format("malformed completion payload: {}", e.what());
        }
      }
    }
    if (impl_->audit) result.usage.audit_ref = impl_->audit->append(record.dump());
    if (text) {
      result.text = std::move(*text);
      return result;
    }
    if (!retry) break;
  }
  const std::string where = result.usage.audit_ref.empty() ? std::string() : " [audit " + result.usage.audit_ref + "]";
  throw Error(last_code, fmt::format("{} after {} attempt(s){}", last_message, result.usage.attempts, where));
}

Completion request_completion(const ClientConfig& cfg, const PromptBundle& bundle) {
  ChatClient client(cfg);
  return client.complete(bundle);
}

}  // namespace tsbench::llm
