#pragma once

#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>

#include "promed/dist.hpp"
#include "promed/http_adapter.hpp"
#include "promed/mcts.hpp"
#include "promed/shapley.hpp"
#include "promed/synthetic.hpp"

namespace promed {

struct SyntheticConfig {
  int cases = 100;
  SyntheticCaseOptions case_options;
  std::string answer_rule = "required-subset";  // always|never|all-facts|required-subset
  double p_answer = 0.25;
  bool emit_logprobs = false;
};

struct EvalConfig {
  int bootstrap = 1000;
  int budget = 10;  // question budget (depth limit)
  double temperature = 0.0;
};

struct NoiseBenchConfig {
  int cases = 100;
  int relevant = 3;
  int dummies = 5;
  double bonus = 1.0;
  std::vector<int> ks = {1, 3, 10};
};

struct RunConfig {
  std::string mode = "synthetic";  // synthetic | http
  std::string dataset;             // JSONL path; optional in synthetic mode
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  int jobs = 1;
  std::string partial_strategy = "first-fact";  // first-fact | random-half
  std::string prompt_dir;                       // template assets; empty = builtins
  std::string weights_recompute = "per-case";   // per-case | per-update-step

  SyntheticConfig synthetic;
  ShapleyOptions shapley;
  SigParams sig;
  McstConfig mcts;
  DistParams dist;
  double clip_eps = 0.2;
  int group_size = 4;
  double group_temperature = 1.0;
  EvalConfig eval;
  NoiseBenchConfig noise;
  std::map<std::string, EndpointConfig> endpoints;  // role -> endpoint

  void validate() const;
  AnswerRule answer_rule() const;
  PartialStrategy strategy() const;
};

// Accepts .json or .toml (a conventional [section] key = value subset:
// strings, numbers, booleans, flat arrays, dotted sections).
RunConfig load_run_config(const std::filesystem::path& path);

// Applies the same schema from an in-memory tree (used by both file formats
// and the tests).
void apply_config_json(RunConfig& config, const nlohmann::json& tree);

// Echo of the effective configuration. The output directory is a runtime
// artifact location, not an experiment parameter, and is omitted so reports
// stay byte-identical across runs into different directories.
nlohmann::json run_config_to_json(const RunConfig& config);

nlohmann::json parse_toml_subset(const std::string& text);

}  // namespace promed
