#include "promed/http_adapter.hpp"

#include <httplib.h>

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "promed/rng.hpp"

namespace promed {

namespace {

using nlohmann::json;

json build_request_body(const EndpointConfig& endpoint,
                        std::span<const ChatMessage> messages, const ChatOptions& options) {
  json body;
  body["model"] = endpoint.model;
  json rendered = json::array();
  for (const ChatMessage& message : messages) {
    rendered.push_back({{"role", message.role}, {"content", message.content}});
  }
  body["messages"] = std::move(rendered);
  body["temperature"] = options.temperature.value_or(endpoint.temperature);
  body["max_tokens"] = options.max_tokens.value_or(endpoint.max_tokens);
  body["logprobs"] = options.want_logprobs;
  return body;
}

ChatResult parse_response(const std::string& raw, bool want_logprobs) {
  json parsed;
  try {
    parsed = json::parse(raw);
  } catch (const json::parse_error& e) {
    raise(ErrorKind::oracle, std::string("malformed JSON response: ") + e.what());
  }

  ChatResult result;
  try {
    const json& choice = parsed.at("choices").at(0);
    result.text = choice.at("message").at("content").get<std::string>();
    if (want_logprobs) {
      if (!choice.contains("logprobs") || choice["logprobs"].is_null()) {
        raise(ErrorKind::capability_missing, "endpoint returned no log-probs");
      }
      std::vector<std::pair<std::string, double>> logprobs;
      for (const json& entry : choice.at("logprobs").at("content")) {
        logprobs.emplace_back(entry.at("token").get<std::string>(),
                              entry.at("logprob").get<double>());
      }
      result.token_logprobs = std::move(logprobs);
    }
  } catch (const json::exception& e) {
    raise(ErrorKind::oracle, std::string("unexpected response shape: ") + e.what());
  }
  return result;
}

}  // namespace

ChatResult chat(const EndpointConfig& endpoint, std::span<const ChatMessage> messages,
                const ChatOptions& options) {
  endpoint.validate();
  if (options.want_logprobs && !endpoint.logprobs_supported) {
    raise(ErrorKind::capability_missing,
          "endpoint " + endpoint.base_url + " does not support log-probs");
  }

  const std::string body = build_request_body(endpoint, messages, options).dump();

  httplib::Headers headers;
  if (!endpoint.auth_env.empty()) {
    const char* token = std::getenv(endpoint.auth_env.c_str());
    if (token != nullptr && *token != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }

  Rng backoff_rng(derive_seed(options.backoff_seed, fnv1a64(endpoint.base_url)));
  std::string last_error;

  for (int attempt = 1; attempt <= endpoint.max_retries + 1; ++attempt) {
    httplib::Client client(endpoint.base_url);
    client.set_connection_timeout(std::chrono::duration<double>(endpoint.timeout_s));
    client.set_read_timeout(std::chrono::duration<double>(endpoint.timeout_s));

    httplib::Result response =
        client.Post(endpoint.path, headers, body, "application/json");

    if (response) {
      if (response->status >= 200 && response->status < 300) {
        ChatResult result = parse_response(response->body, options.want_logprobs);
        result.attempts = attempt;
        return result;
      }
      if (response->status >= 400 && response->status < 500) {
        raise(ErrorKind::config, "endpoint rejected request with HTTP " +
                                     std::to_string(response->status) + ": " + response->body);
      }
      last_error = "HTTP " + std::to_string(response->status);
    } else {
      last_error = httplib::to_string(response.error());
    }

    if (attempt <= endpoint.max_retries) {
      const double base = endpoint.backoff_base_s * std::pow(2.0, attempt - 1);
      const double jitter =
          1.0 + endpoint.backoff_jitter * (2.0 * backoff_rng.next_unit() - 1.0);
      std::this_thread::sleep_for(std::chrono::duration<double>(base * jitter));
    }
  }
  raise(ErrorKind::oracle, "chat request failed after " +
                               std::to_string(endpoint.max_retries + 1) +
                               " attempts: " + last_error);
}

PolicyAction parse_doctor_reply(const std::string& text, bool* deviation) {
  if (deviation != nullptr) *deviation = false;

  std::string trimmed = text;
  std::size_t start = 0;
  while (start < trimmed.size() && std::isspace(static_cast<unsigned char>(trimmed[start]))) {
    ++start;
  }
  trimmed = trimmed.substr(start);
  if (trimmed.empty()) {
    raise(ErrorKind::retryable_oracle, "empty doctor reply");
  }

  auto starts_with_ci = [&](std::string_view marker) {
    if (trimmed.size() < marker.size()) return false;
    for (std::size_t i = 0; i < marker.size(); ++i) {
      if (std::tolower(static_cast<unsigned char>(trimmed[i])) != marker[i]) return false;
    }
    return true;
  };

  PolicyAction action;
  action.text = trimmed;
  if (starts_with_ci(kAskMarker)) {
    action.kind = PolicyAction::Kind::ask;
  } else if (starts_with_ci(kAnswerMarker)) {
    action.kind = PolicyAction::Kind::answer;
  } else {
    std::string lower = trimmed;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    action.kind = lower.find("[answer:") != std::string::npos ? PolicyAction::Kind::answer
                                                              : PolicyAction::Kind::ask;
    if (deviation != nullptr) *deviation = true;
  }
  return action;
}

std::string format_option_str(const PatientCase& kase) {
  std::ostringstream out;
  bool first = true;
  for (const auto& [letter, text] : kase.options) {
    if (!first) out << '\n';
    out << letter << ": " << text;
    first = false;
  }
  return out.str();
}

std::string format_dialogue(std::span<const DialogueTurn> history) {
  if (history.empty()) return "(no dialogue yet)";
  std::ostringstream out;
  for (const DialogueTurn& turn : history) {
    out << "Doctor: " << turn.question_text << '\n'
        << "Patient: " << turn.response_text << '\n';
  }
  return out.str();
}

AdapterPrompts load_adapter_prompts(const std::filesystem::path& dir) {
  AdapterPrompts prompts;
  prompts.doctor_system = load_template(TemplateId::doctor_system, dir);
  prompts.patient = load_template(TemplateId::patient, dir);
  prompts.understanding = load_template(TemplateId::understanding, dir);
  prompts.fact_checker = load_template(TemplateId::fact_checker, dir);
  return prompts;
}

namespace {

void attach_reply_tokens(PolicyAction& action, const ChatResult& reply) {
  if (reply.token_logprobs) {
    std::vector<std::string> tokens;
    std::vector<double> logprobs;
    tokens.reserve(reply.token_logprobs->size());
    for (const auto& [token, logprob] : *reply.token_logprobs) {
      tokens.push_back(token);
      logprobs.push_back(logprob);
    }
    action.tokens = std::move(tokens);
    action.token_logprobs = std::move(logprobs);
  } else {
    action.tokens = whitespace_tokens(action.text);
  }
}

}  // namespace

PolicyAction HttpPolicy::next_action(const PartialQuestion& partial,
                                     std::span<const DialogueTurn> history,
                                     const ActionOptions& options) {
  const PatientCase& kase = *partial.kase;
  std::vector<ChatMessage> messages;
  messages.push_back({"system", render(prompts_.doctor_system,
                                       {{"question_type", kase.question_type},
                                        {"question", partial.rendered_text},
                                        {"option_str", format_option_str(kase)}})});
  for (const DialogueTurn& turn : history) {
    messages.push_back({"assistant", std::string(kAskMarker) + " " + turn.question_text});
    messages.push_back({"user", turn.response_text});
  }
  if (options.force_answer) {
    messages.push_back({"user",
                        "The question limit has been reached. You must now provide your "
                        "final answer in the required format."});
  }

  ChatOptions chat_options;
  chat_options.temperature = options.temperature;
  chat_options.want_logprobs = endpoint_.logprobs_supported;
  chat_options.backoff_seed = fnv1a64(kase.case_id) ^ history.size();
  const ChatResult reply = chat(endpoint_, messages, chat_options);

  bool deviation = false;
  PolicyAction action = parse_doctor_reply(reply.text, &deviation);
  if (deviation) deviations_.fetch_add(1);
  attach_reply_tokens(action, reply);
  return action;
}

std::string HttpPolicy::understanding(const PartialQuestion& partial,
                                      std::span<const DialogueTurn> history) {
  const std::vector<ChatMessage> messages = {
      {"user", render(prompts_.understanding,
                      {{"patient_information", partial.rendered_text},
                       {"dialogue", format_dialogue(history)}})}};
  ChatOptions options;
  options.temperature = 0.0;
  options.backoff_seed = fnv1a64(partial.kase->case_id) ^ 0x5544u;
  return chat(endpoint_, messages, options).text;
}

std::string HttpPatient::respond(const std::string& question,
                                 std::span<const AtomicFact> facts) {
  std::ostringstream fact_lines;
  for (const AtomicFact& fact : facts) fact_lines << fact.text << '\n';

  const std::vector<ChatMessage> messages = {
      {"system", render(prompts_.patient, {{"atomic_facts", fact_lines.str()}})},
      {"user", question}};
  ChatOptions options;
  options.backoff_seed = fnv1a64(question);
  return chat(endpoint_, messages, options).text;
}

bool HttpChecker::entails(const std::string& understanding, const AtomicFact& fact) {
  const std::vector<ChatMessage> messages = {
      {"user", render(prompts_.fact_checker,
                      {{"context", understanding}, {"fact", fact.text}})}};
  ChatOptions options;
  options.temperature = 0.0;
  options.max_tokens = 8;
  options.backoff_seed = fnv1a64(understanding) ^ static_cast<std::uint64_t>(fact.id);
  const std::string reply = chat(endpoint_, messages, options).text;

  std::string token;
  for (char c : reply) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!token.empty()) {
      break;
    }
  }
  if (token == "true") return true;
  if (token != "false") deviations_.fetch_add(1);
  return false;
}

double HttpScorer::answer_logprob(const PatientCase& kase, std::span<const int> subset) {
  if (!endpoint_.logprobs_supported) {
    raise(ErrorKind::capability_missing,
          "answer scoring needs log-prob support on the scorer endpoint");
  }

  std::ostringstream prompt;
  prompt << "Patient findings:\n";
  if (subset.empty()) prompt << "(none provided)\n";
  for (int id : subset) prompt << kase.facts[static_cast<std::size_t>(id)].text << '\n';
  prompt << "\nQuestion: " << kase.atomic_question << "\nOptions:\n"
         << format_option_str(kase)
         << "\nReply with only the letter(s) of the correct option.";

  const std::vector<ChatMessage> messages = {{"user", prompt.str()}};
  ChatOptions options;
  options.temperature = 0.0;
  options.max_tokens = 8;
  options.want_logprobs = true;
  std::ostringstream salt;
  for (int id : subset) salt << id << ',';
  options.backoff_seed = fnv1a64(kase.case_id) ^ fnv1a64(salt.str());
  const ChatResult reply = chat(endpoint_, messages, options);

  // Sum the log-probs of tokens made entirely of gold letters; multi-letter
  // golds may arrive as one token or several.
  double total = 0.0;
  int matched = 0;
  for (const auto& [token, logprob] : *reply.token_logprobs) {
    std::string letters;
    for (char c : token) {
      if (std::isalnum(static_cast<unsigned char>(c))) {
        letters.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
      }
    }
    if (letters.empty()) continue;
    const bool all_gold = std::all_of(letters.begin(), letters.end(), [&](char c) {
      return kase.gold_answer.contains(c);
    });
    if (all_gold) {
      total += logprob;
      ++matched;
    }
  }
  if (matched == 0) {
    raise(ErrorKind::oracle, "scored completion contained no gold-letter tokens for case " +
                                 kase.case_id);
  }
  return total;
}

}  // namespace promed
