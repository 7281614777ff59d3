#include "promed/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace promed {

using nlohmann::json;

void RunConfig::validate() const {
  require(mode == "synthetic" || mode == "http", ErrorKind::config,
          "mode must be 'synthetic' or 'http', got '" + mode + "'");
  require(jobs >= 1, ErrorKind::config, "jobs must be >= 1");
  require(partial_strategy == "first-fact" || partial_strategy == "random-half",
          ErrorKind::config, "unknown partial strategy '" + partial_strategy + "'");
  require(weights_recompute == "per-case" || weights_recompute == "per-update-step",
          ErrorKind::config, "unknown weights_recompute mode");
  require(group_size >= 2, ErrorKind::config, "group_size must be >= 2");
  require(clip_eps > 0.0, ErrorKind::config, "clip_eps must be positive");
  shapley.mc.validate();
  sig.validate();
  mcts.validate();
  dist.validate();
  if (mode == "http") {
    require(!dataset.empty(), ErrorKind::config, "http mode requires a dataset");
    require(!endpoints.empty(), ErrorKind::config, "http mode requires [endpoints.<role>]");
    for (const auto& [role, endpoint] : endpoints) endpoint.validate();
  }
}

AnswerRule RunConfig::answer_rule() const {
  if (synthetic.answer_rule == "always") return AnswerRule::always;
  if (synthetic.answer_rule == "never") return AnswerRule::never;
  if (synthetic.answer_rule == "all-facts") return AnswerRule::all_facts;
  if (synthetic.answer_rule == "required-subset") return AnswerRule::required_subset;
  raise(ErrorKind::config, "unknown answer rule '" + synthetic.answer_rule + "'");
}

PartialStrategy RunConfig::strategy() const {
  return partial_strategy == "random-half" ? PartialStrategy::random_half
                                           : PartialStrategy::first_fact;
}

namespace {

template <class T>
void read(const json& tree, const char* key, T& out) {
  if (!tree.contains(key)) return;
  try {
    out = tree.at(key).get<T>();
  } catch (const json::exception& e) {
    raise(ErrorKind::config, std::string("config field '") + key + "': " + e.what());
  }
}

SyntheticValueSpec::Family family_from_name(const std::string& name) {
  if (name == "additive") return SyntheticValueSpec::Family::additive;
  if (name == "conjunctive") return SyntheticValueSpec::Family::conjunctive;
  if (name == "noisy-additive") return SyntheticValueSpec::Family::noisy_additive;
  raise(ErrorKind::config, "unknown value family '" + name + "'");
}

const char* family_name(SyntheticValueSpec::Family family) {
  switch (family) {
    case SyntheticValueSpec::Family::additive: return "additive";
    case SyntheticValueSpec::Family::conjunctive: return "conjunctive";
    case SyntheticValueSpec::Family::noisy_additive: return "noisy-additive";
  }
  return "additive";
}

void apply_endpoint(EndpointConfig& endpoint, const json& tree) {
  read(tree, "base_url", endpoint.base_url);
  read(tree, "path", endpoint.path);
  read(tree, "model", endpoint.model);
  read(tree, "auth_env", endpoint.auth_env);
  read(tree, "timeout_s", endpoint.timeout_s);
  read(tree, "max_retries", endpoint.max_retries);
  read(tree, "backoff_base_s", endpoint.backoff_base_s);
  read(tree, "backoff_jitter", endpoint.backoff_jitter);
  read(tree, "max_tokens", endpoint.max_tokens);
  read(tree, "temperature", endpoint.temperature);
  read(tree, "logprobs_supported", endpoint.logprobs_supported);
}

}  // namespace

void apply_config_json(RunConfig& config, const json& tree) {
  read(tree, "mode", config.mode);
  read(tree, "dataset", config.dataset);
  read(tree, "seed", config.seed);
  read(tree, "out_dir", config.out_dir);
  read(tree, "jobs", config.jobs);
  read(tree, "partial_strategy", config.partial_strategy);
  read(tree, "prompt_dir", config.prompt_dir);
  read(tree, "weights_recompute", config.weights_recompute);

  if (tree.contains("synthetic")) {
    const json& s = tree["synthetic"];
    read(s, "cases", config.synthetic.cases);
    read(s, "facts", config.synthetic.case_options.fact_count);
    read(s, "options", config.synthetic.case_options.option_count);
    if (s.contains("family")) {
      config.synthetic.case_options.family =
          family_from_name(s["family"].get<std::string>());
    }
    read(s, "required", config.synthetic.case_options.required_count);
    read(s, "bonus", config.synthetic.case_options.bonus);
    read(s, "base", config.synthetic.case_options.base);
    read(s, "weight_lo", config.synthetic.case_options.weight_lo);
    read(s, "weight_hi", config.synthetic.case_options.weight_hi);
    read(s, "noise_scale", config.synthetic.case_options.noise_scale);
    read(s, "answer_rule", config.synthetic.answer_rule);
    read(s, "p_answer", config.synthetic.p_answer);
    read(s, "emit_logprobs", config.synthetic.emit_logprobs);
  }

  if (tree.contains("shapley")) {
    const json& s = tree["shapley"];
    read(s, "prefer_exact", config.shapley.prefer_exact);
    read(s, "subset_limit", config.shapley.subset_limit);
    read(s, "max_iterations", config.shapley.mc.max_iterations);
    read(s, "tolerance", config.shapley.mc.tolerance);
    read(s, "seed", config.shapley.mc.seed);
    read(s, "early_break", config.shapley.mc.permutation_early_break);
  }

  if (tree.contains("sig")) {
    const json& s = tree["sig"];
    read(s, "alpha", config.sig.alpha);
    read(s, "beta", config.sig.beta);
  }

  if (tree.contains("mcts")) {
    const json& m = tree["mcts"];
    read(m, "exploration_c", config.mcts.exploration_c);
    read(m, "uct_epsilon", config.mcts.uct_epsilon);
    read(m, "max_width", config.mcts.max_width);
    read(m, "iterations", config.mcts.iterations);
    read(m, "max_depth", config.mcts.max_depth);
    read(m, "temperature", config.mcts.temperature);
    read(m, "novel_attempts", config.mcts.novel_attempts);
  }

  if (tree.contains("dist")) {
    const json& d = tree["dist"];
    read(d, "alpha", config.dist.alpha);
    read(d, "beta", config.dist.beta);
    read(d, "lambda_q", config.dist.lambda_q);
    read(d, "lambda_a", config.dist.lambda_a);
    read(d, "clip_eps", config.clip_eps);
    read(d, "group_size", config.group_size);
    read(d, "temperature", config.group_temperature);
  }

  if (tree.contains("eval")) {
    const json& e = tree["eval"];
    read(e, "bootstrap", config.eval.bootstrap);
    read(e, "budget", config.eval.budget);
    read(e, "temperature", config.eval.temperature);
  }

  if (tree.contains("noise")) {
    const json& n = tree["noise"];
    read(n, "cases", config.noise.cases);
    read(n, "relevant", config.noise.relevant);
    read(n, "dummies", config.noise.dummies);
    read(n, "bonus", config.noise.bonus);
    read(n, "ks", config.noise.ks);
  }

  if (tree.contains("endpoints")) {
    for (const auto& [role, endpoint_tree] : tree["endpoints"].items()) {
      apply_endpoint(config.endpoints[role], endpoint_tree);
    }
  }
}

json run_config_to_json(const RunConfig& config) {
  json tree;
  tree["mode"] = config.mode;
  tree["dataset"] = config.dataset;
  tree["seed"] = config.seed;
  tree["jobs"] = config.jobs;
  tree["partial_strategy"] = config.partial_strategy;
  tree["prompt_dir"] = config.prompt_dir;
  tree["weights_recompute"] = config.weights_recompute;

  tree["synthetic"] = {
      {"cases", config.synthetic.cases},
      {"facts", config.synthetic.case_options.fact_count},
      {"options", config.synthetic.case_options.option_count},
      {"family", family_name(config.synthetic.case_options.family)},
      {"required", config.synthetic.case_options.required_count},
      {"bonus", config.synthetic.case_options.bonus},
      {"base", config.synthetic.case_options.base},
      {"weight_lo", config.synthetic.case_options.weight_lo},
      {"weight_hi", config.synthetic.case_options.weight_hi},
      {"noise_scale", config.synthetic.case_options.noise_scale},
      {"answer_rule", config.synthetic.answer_rule},
      {"p_answer", config.synthetic.p_answer},
      {"emit_logprobs", config.synthetic.emit_logprobs},
  };
  tree["shapley"] = {
      {"prefer_exact", config.shapley.prefer_exact},
      {"subset_limit", config.shapley.subset_limit},
      {"max_iterations", config.shapley.mc.max_iterations},
      {"tolerance", config.shapley.mc.tolerance},
      {"seed", config.shapley.mc.seed},
      {"early_break", config.shapley.mc.permutation_early_break},
  };
  tree["sig"] = {{"alpha", config.sig.alpha}, {"beta", config.sig.beta}};
  tree["mcts"] = {
      {"exploration_c", config.mcts.exploration_c},
      {"uct_epsilon", config.mcts.uct_epsilon},
      {"max_width", config.mcts.max_width},
      {"iterations", config.mcts.iterations},
      {"max_depth", config.mcts.max_depth},
      {"temperature", config.mcts.temperature},
      {"novel_attempts", config.mcts.novel_attempts},
  };
  tree["dist"] = {
      {"alpha", config.dist.alpha},
      {"beta", config.dist.beta},
      {"lambda_q", config.dist.lambda_q},
      {"lambda_a", config.dist.lambda_a},
      {"clip_eps", config.clip_eps},
      {"group_size", config.group_size},
      {"temperature", config.group_temperature},
  };
  tree["eval"] = {
      {"bootstrap", config.eval.bootstrap},
      {"budget", config.eval.budget},
      {"temperature", config.eval.temperature},
  };
  tree["noise"] = {
      {"cases", config.noise.cases},
      {"relevant", config.noise.relevant},
      {"dummies", config.noise.dummies},
      {"bonus", config.noise.bonus},
      {"ks", config.noise.ks},
  };

  json endpoints = json::object();
  for (const auto& [role, endpoint] : config.endpoints) {
    endpoints[role] = {
        {"base_url", endpoint.base_url},
        {"path", endpoint.path},
        {"model", endpoint.model},
        {"auth_env", endpoint.auth_env},
        {"timeout_s", endpoint.timeout_s},
        {"max_retries", endpoint.max_retries},
        {"backoff_base_s", endpoint.backoff_base_s},
        {"backoff_jitter", endpoint.backoff_jitter},
        {"max_tokens", endpoint.max_tokens},
        {"temperature", endpoint.temperature},
        {"logprobs_supported", endpoint.logprobs_supported},
    };
  }
  tree["endpoints"] = std::move(endpoints);
  return tree;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

json parse_toml_scalar(const std::string& raw, int line_number) {
  const std::string value = trim(raw);
  require(!value.empty(), ErrorKind::config,
          "config line " + std::to_string(line_number) + ": empty value");

  if (value.front() == '"' && value.back() == '"' && value.size() >= 2) {
    std::string out;
    for (std::size_t i = 1; i + 1 < value.size(); ++i) {
      if (value[i] == '\\' && i + 2 < value.size()) {
        ++i;
        switch (value[i]) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          default: out.push_back(value[i]);
        }
      } else {
        out.push_back(value[i]);
      }
    }
    return out;
  }
  if (value == "true") return true;
  if (value == "false") return false;

  try {
    std::size_t used = 0;
    if (value.find_first_of(".eE") == std::string::npos || value.find("0x") == 0) {
      const long long integer = std::stoll(value, &used);
      if (used == value.size()) return integer;
    }
    const double real = std::stod(value, &used);
    require(used == value.size(), ErrorKind::config,
            "config line " + std::to_string(line_number) + ": bad number '" + value + "'");
    return real;
  } catch (const std::exception&) {
    raise(ErrorKind::config, "config line " + std::to_string(line_number) +
                                 ": cannot parse value '" + value + "'");
  }
}

json parse_toml_value(const std::string& raw, int line_number) {
  const std::string value = trim(raw);
  if (!value.empty() && value.front() == '[') {
    require(value.back() == ']', ErrorKind::config,
            "config line " + std::to_string(line_number) + ": unterminated array");
    json array = json::array();
    std::string element;
    bool in_string = false;
    for (std::size_t i = 1; i + 1 < value.size(); ++i) {
      const char c = value[i];
      if (c == '"') in_string = !in_string;
      if (c == ',' && !in_string) {
        if (!trim(element).empty()) array.push_back(parse_toml_scalar(element, line_number));
        element.clear();
      } else {
        element.push_back(c);
      }
    }
    if (!trim(element).empty()) array.push_back(parse_toml_scalar(element, line_number));
    return array;
  }
  return parse_toml_scalar(value, line_number);
}

std::string strip_comment(const std::string& line) {
  std::string out;
  bool in_string = false;
  for (char c : line) {
    if (c == '"') in_string = !in_string;
    if (c == '#' && !in_string) break;
    out.push_back(c);
  }
  return out;
}

}  // namespace

json parse_toml_subset(const std::string& text) {
  json root = json::object();
  json* section = &root;

  std::istringstream in(text);
  std::string raw;
  int line_number = 0;
  while (std::getline(in, raw)) {
    ++line_number;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;

    if (line.front() == '[') {
      require(line.back() == ']', ErrorKind::config,
              "config line " + std::to_string(line_number) + ": unterminated section");
      section = &root;
      std::istringstream parts(line.substr(1, line.size() - 2));
      std::string part;
      while (std::getline(parts, part, '.')) {
        const std::string name = trim(part);
        require(!name.empty(), ErrorKind::config,
                "config line " + std::to_string(line_number) + ": empty section name");
        section = &(*section)[name];
        if (!section->is_object()) *section = json::object();
      }
      continue;
    }

    const std::size_t equals = line.find('=');
    require(equals != std::string::npos, ErrorKind::config,
            "config line " + std::to_string(line_number) + ": expected key = value");
    const std::string key = trim(line.substr(0, equals));
    require(!key.empty(), ErrorKind::config,
            "config line " + std::to_string(line_number) + ": empty key");
    (*section)[key] = parse_toml_value(line.substr(equals + 1), line_number);
  }
  return root;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::config, "cannot open config " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  json tree;
  if (path.extension() == ".json") {
    try {
      tree = json::parse(text);
    } catch (const json::parse_error& e) {
      raise(ErrorKind::config, path.string() + ": " + e.what());
    }
  } else {
    tree = parse_toml_subset(text);
  }

  RunConfig config;
  apply_config_json(config, tree);
  return config;
}

}  // namespace promed
