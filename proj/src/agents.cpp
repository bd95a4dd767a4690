#include <cctype>
#include <fmt/format.h>

#include "tsbench/error.hpp"
#include "tsbench/harness.hpp"
#include "tsbench/rng.hpp"

namespace tsbench::harness {

namespace {
AgentReply reply(std::string text) {
  AgentReply r;
  r.text = std::move(text);
  return r;
}
}  // namespace

AgentReply OracleAgent::answer(const QAItem& item, const ModelRequest&) { return reply(scoring::format_answer(item)); }

std::string RandomAgent::model_id() const { return fmt::format("random:{}", seed_); }

AgentReply RandomAgent::answer(const QAItem& item, const ModelRequest&) {
  if (!is_multiple_choice(item.task_kind)) return reply("I cannot determine the answer.");
  Rng rng(derive_seed(seed_, item.id));
  return reply(fmt::format("The correct answer is {}", static_cast<char>('A' + rng.index(4))));
}

ConstantAgent::ConstantAgent(char letter) : letter_(letter) {
  if (letter < 'A' || letter > 'D') throw Error(Errc::invalid_config, fmt::format("constant agent letter '{}' outside A-D", letter));
}

std::string ConstantAgent::model_id() const { return fmt::format("constant:{}", letter_); }

AgentReply ConstantAgent::answer(const QAItem& item, const ModelRequest&) {
  if (!is_multiple_choice(item.task_kind)) return reply("I cannot determine the answer.");
  return reply(fmt::format("The correct answer is {}", letter_));
}

AgentReply EndpointAgent::answer(const QAItem&, const ModelRequest& request) {
  llm::PromptBundle bundle;
  bundle.template_id = llm::TemplateId::evaluation;
  bundle.user_text = request.text;
  bundle.images = request.images;
  auto completion = client_.complete(bundle);
  return {std::move(completion.text), completion.usage.attempts, completion.usage.latency_ms, completion.usage.audit_ref};
}

std::unique_ptr<Agent> make_scripted_agent(std::string_view spec) {
  const auto colon = spec.find(':');
  const std::string_view name = spec.substr(0, colon);
  const std::string_view arg = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);
  if (name == "oracle" && arg.empty()) return std::make_unique<OracleAgent>();
  if (name == "random") {
    std::uint64_t seed = 0;
    if (!arg.empty()) {
      double v = 0.0;
      if (!parse_number(arg, v) || v < 0 || v != static_cast<double>(static_cast<std::uint64_t>(v))) {
        throw Error(Errc::invalid_config, fmt::format("bad random agent seed '{}'", arg));
      }
      seed = static_cast<std::uint64_t>(v);
    }
    return std::make_unique<RandomAgent>(seed);
  }
  if (name == "constant" && arg.size() == 1) {
    return std::make_unique<ConstantAgent>(static_cast<char>(std::toupper(static_cast<unsigned char>(arg[0]))));
  }
  throw Error(Errc::invalid_config,
              fmt::format("unknown agent '{}' (valid: oracle, random[:seed], constant:X, endpoint)", spec));
}

}  // namespace tsbench::harness
