#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "tsevo/gen/generator.hpp"

namespace tsevo::gen {

using nlohmann::json;

RemoteConfig RemoteConfig::from_env() {
  auto get = [](const char* key) -> std::string {
    const char* v = std::getenv(key);
    return v ? v : "";
  };
  RemoteConfig c;
  c.endpoint = get("TSEVO_LLM_ENDPOINT");
  c.model = get("TSEVO_LLM_MODEL");
  c.api_key = get("TSEVO_LLM_API_KEY");
  if (c.endpoint.empty()) throw ConfigError("TSEVO_LLM_ENDPOINT is not set");
  if (c.model.empty()) throw ConfigError("TSEVO_LLM_MODEL is not set");
  return c;
}

json chat_request_body(const RemoteConfig& config, const PromptBundle& prompts) {
  return json{{"model", config.model},
              {"temperature", config.temperature},
              {"messages",
               json::array({json{{"role", "system"}, {"content", prompts.system}},
                            json{{"role", "user"}, {"content", prompts.user}}})}};
}

std::string chat_reply_content(const json& response) {
  try {
    return response.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw InvalidDraft(std::string("unexpected completion shape: ") + e.what());
  }
}

namespace {

struct Target {
  std::string base;  // scheme://host[:port]
  std::string path;
};

Target split(const std::string& endpoint) {
  const auto scheme = endpoint.find("://");
  if (scheme == std::string::npos) throw ConfigError("endpoint needs a scheme: " + endpoint);
  const auto slash = endpoint.find('/', scheme + 3);
  Target t;
  t.base = endpoint.substr(0, slash);
  t.path = slash == std::string::npos ? "" : endpoint.substr(slash);
  while (!t.path.empty() && t.path.back() == '/') t.path.pop_back();
  const std::string suffix = "/chat/completions";
  if (t.path.size() < suffix.size() || t.path.compare(t.path.size() - suffix.size(), suffix.size(), suffix) != 0) {
    t.path += suffix;
  }
  return t;
}

}  // namespace

std::string RemoteBackend::complete(const DraftRequest& request) {
  const Target target = split(config_.endpoint);
  httplib::Client client(target.base);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  const std::string body = chat_request_body(config_, request.prompts).dump();

  auto wait = config_.backoff;
  std::string last_error;
  for (int attempt = 0; attempt <= config_.transport_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(wait);
      wait *= 2;
    }
    auto res = client.Post(target.path, headers, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw GeneratorUnavailable("HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    json parsed;
    try {
      parsed = json::parse(res->body);
    } catch (const json::parse_error& e) {
      throw InvalidDraft(std::string("completion is not JSON: ") + e.what());
    }
    return chat_reply_content(parsed);
  }
  throw GeneratorUnavailable("generator unreachable after " + std::to_string(config_.transport_retries + 1) +
                             " attempts: " + last_error);
}

}  // namespace tsevo::gen
