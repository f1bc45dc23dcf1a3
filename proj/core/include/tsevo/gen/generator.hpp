#pragma once

#include <array>
#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsevo/dsl/whitelist.hpp"
#include "tsevo/error.hpp"
#include "tsevo/events/events.hpp"
#include "tsevo/skill.hpp"

namespace tsevo::gen {

struct PromptBundle {
  std::string system;
  std::string user;
};

// The three figures shown to the generator alongside the elite.
struct MetricSummary {
  double avg_delay = 0.0;
  double avg_queue = 0.0;
  double throughput = 0.0;
};

inline constexpr std::string_view kNeutralDirection = "optimize performance";

PromptBundle build_prompts(const Skill& elite, const MetricSummary& metrics, std::string_view direction,
                           const dsl::VariableWhitelist& whitelist,
                           std::optional<events::EventKind> event_kind = std::nullopt);

// Everything a backend may look at when drafting one candidate.
struct DraftRequest {
  Skill elite;
  PromptBundle prompts;
  bool force_innovation = false;
  bool event_variables = false;
  std::optional<events::EventKind> event_kind;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  virtual bool deterministic() const = 0;
  // One generator call. Returns the raw reply text, expected to hold a JSON
  // skill object. Throws GeneratorUnavailable on transport failure.
  virtual std::string complete(const DraftRequest& request) = 0;
  // Serializable internal state (PRNG streams) for checkpoints.
  virtual nlohmann::json state() const { return nullptr; }
  virtual void restore(const nlohmann::json&) {}
};

// Extracts the skill object from a reply, fenced or bare. Throws
// InvalidDraft when no object with the four text fields is found.
Skill parse_draft(std::string_view reply);

class InvalidDraft : public Error {
 public:
  using Error::Error;
};

enum class Mutation { coefficient, threshold, wrap_if, term, rewrite };
std::string_view mutation_name(Mutation m);

struct MutatorConfig {
  // Selection weights without force_innovation, in enum order.
  std::array<double, 5> weights = {0.3, 0.15, 0.15, 0.25, 0.15};
  // Probability of a structure rewrite while force_innovation is set.
  double innovation_rewrite = 0.85;
};

struct MutationResult {
  Skill draft;
  Mutation applied = Mutation::coefficient;
};

// Deterministic stand-in for the language model: one grammar-closed edit of
// the elite. Every draft passes sandbox_check under the lane whitelist (or
// the event whitelist when `event_variables` is set).
MutationResult scripted_mutate(const Skill& elite, bool force_innovation, std::mt19937_64& rng,
                               bool event_variables = false, const MutatorConfig& config = {},
                               std::optional<events::EventKind> event_kind = std::nullopt);

class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(std::uint64_t seed, MutatorConfig config = {}) : rng_(seed), config_(config) {}
  std::string name() const override { return "scripted"; }
  bool deterministic() const override { return true; }
  std::string complete(const DraftRequest& request) override;
  nlohmann::json state() const override;
  void restore(const nlohmann::json& state) override;

 private:
  std::mt19937_64 rng_;
  MutatorConfig config_;
};

struct RemoteConfig {
  std::string endpoint;  // base URL; "/chat/completions" is appended when missing
  std::string model;
  std::string api_key;
  double temperature = 0.7;
  std::chrono::seconds timeout{60};
  int transport_retries = 3;
  std::chrono::milliseconds backoff{1000};  // doubled per retry

  // TSEVO_LLM_ENDPOINT, TSEVO_LLM_MODEL, TSEVO_LLM_API_KEY. Throws
  // ConfigError when the endpoint or model is unset.
  static RemoteConfig from_env();
};

// OpenAI-compatible chat-completions client.
class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(RemoteConfig config) : config_(std::move(config)) {}
  std::string name() const override { return "remote:" + config_.model; }
  bool deterministic() const override { return false; }
  std::string complete(const DraftRequest& request) override;
  const RemoteConfig& config() const { return config_; }

 private:
  RemoteConfig config_;
};

nlohmann::json chat_request_body(const RemoteConfig& config, const PromptBundle& prompts);
// The first choice's message content. Throws InvalidDraft on other shapes.
std::string chat_reply_content(const nlohmann::json& response);

// Audit callback: event kind ("generated", "validated", "rejected") + data.
using AuditSink = std::function<void(std::string_view, nlohmann::json)>;

struct GenerateResult {
  std::vector<Skill> drafts;
  int calls = 0;
  int retries = 0;
  int dropped = 0;
};

// Requests `count` drafts. A reply that fails to parse or validate is
// re-prompted with the error appended, at most `max_retries` times; a draft
// still failing after that is dropped.
GenerateResult generate(Backend& backend, const DraftRequest& request, int count,
                        const dsl::VariableWhitelist& whitelist, int max_retries = 3, const AuditSink& audit = {});

}  // namespace tsevo::gen
