#pragma once

#include <atomic>
#include <utility>

#include "promed/oracles.hpp"
#include "promed/prompts.hpp"

namespace promed {

struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8080";
  std::string path = "/v1/chat/completions";
  std::string model = "default-model";
  std::string auth_env;  // env var holding the bearer token, empty = no auth
  double timeout_s = 60.0;
  int max_retries = 3;          // attempts beyond the first
  double backoff_base_s = 0.5;  // doubled per retry
  double backoff_jitter = 0.25; // +/- fraction of the delay
  int max_tokens = 1024;
  double temperature = 1.0;
  bool logprobs_supported = false;

  void validate() const {
    require(timeout_s > 0.0, ErrorKind::config, "endpoint timeout must be positive");
    require(max_retries >= 0, ErrorKind::config, "max retries must be >= 0");
  }
};

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatOptions {
  std::optional<double> temperature;  // default: endpoint temperature
  std::optional<int> max_tokens;
  bool want_logprobs = false;
  std::uint64_t backoff_seed = 0;
};

struct ChatResult {
  std::string text;
  std::optional<std::vector<std::pair<std::string, double>>> token_logprobs;
  int attempts = 1;
};

// Single chat-completions round trip with retry and exponential backoff.
// 4xx -> Error(config); retries exhausted / malformed body -> Error(oracle).
ChatResult chat(const EndpointConfig& endpoint, std::span<const ChatMessage> messages,
                const ChatOptions& options);

// Classifies a doctor reply by its protocol marker. Replies with neither
// marker are answers when they carry "[answer:", otherwise asks (deviation).
PolicyAction parse_doctor_reply(const std::string& text, bool* deviation = nullptr);

std::string format_option_str(const PatientCase& kase);
std::string format_dialogue(std::span<const DialogueTurn> history);

// Templates used by the HTTP-backed oracles; defaults are the builtins.
struct AdapterPrompts {
  PromptTemplate doctor_system = builtin_template(TemplateId::doctor_system);
  PromptTemplate patient = builtin_template(TemplateId::patient);
  PromptTemplate understanding = builtin_template(TemplateId::understanding);
  PromptTemplate fact_checker = builtin_template(TemplateId::fact_checker);
};

AdapterPrompts load_adapter_prompts(const std::filesystem::path& dir);

class HttpPolicy : public Policy {
 public:
  HttpPolicy(EndpointConfig endpoint, AdapterPrompts prompts)
      : endpoint_(std::move(endpoint)), prompts_(std::move(prompts)) {}

  PolicyAction next_action(const PartialQuestion& partial,
                           std::span<const DialogueTurn> history,
                           const ActionOptions& options) override;
  std::string understanding(const PartialQuestion& partial,
                            std::span<const DialogueTurn> history) override;
  OracleCaps caps() const override {
    return {.max_in_flight = 0, .supports_logprobs = endpoint_.logprobs_supported};
  }

  int protocol_deviations() const { return deviations_.load(); }

 private:
  EndpointConfig endpoint_;
  AdapterPrompts prompts_;
  std::atomic<int> deviations_{0};
};

class HttpPatient : public Patient {
 public:
  HttpPatient(EndpointConfig endpoint, AdapterPrompts prompts)
      : endpoint_(std::move(endpoint)), prompts_(std::move(prompts)) {}

  std::string respond(const std::string& question,
                      std::span<const AtomicFact> facts) override;

 private:
  EndpointConfig endpoint_;
  AdapterPrompts prompts_;
};

// Parses a leading True/False token, case-insensitively; anything else counts
// as false and increments the deviation counter.
class HttpChecker : public FactChecker {
 public:
  HttpChecker(EndpointConfig endpoint, AdapterPrompts prompts)
      : endpoint_(std::move(endpoint)), prompts_(std::move(prompts)) {}

  bool entails(const std::string& understanding, const AtomicFact& fact) override;
  int deviations() const { return deviations_.load(); }

 private:
  EndpointConfig endpoint_;
  AdapterPrompts prompts_;
  std::atomic<int> deviations_{0};
};

// v(S) = sum of the log-probs of gold-letter tokens in a letters-only
// completion. Requires log-prob support; raises Error(capability_missing)
// otherwise.
class HttpScorer : public AnswerScorer {
 public:
  explicit HttpScorer(EndpointConfig endpoint) : endpoint_(std::move(endpoint)) {}

  double answer_logprob(const PatientCase& kase, std::span<const int> subset) override;
  OracleCaps caps() const override {
    return {.max_in_flight = 0, .supports_logprobs = endpoint_.logprobs_supported};
  }

 private:
  EndpointConfig endpoint_;
};

}  // namespace promed
