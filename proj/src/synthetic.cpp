#include "promed/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>
#include <unordered_set>

namespace promed {

void SyntheticValueSpec::validate(int fact_count) const {
  require(static_cast<int>(weights.size()) == fact_count, ErrorKind::invalid_input,
          "value spec weights length " + std::to_string(weights.size()) +
              " != fact count " + std::to_string(fact_count));
  for (int id : required_set) {
    require(id >= 0 && id < fact_count, ErrorKind::invalid_input,
            "required fact id out of range");
  }
}

double synthetic_value(const SyntheticValueSpec& spec, std::span<const int> subset_sorted) {
  double weight_sum = 0.0;
  for (int id : subset_sorted) weight_sum += spec.weights(id);

  switch (spec.family) {
    case SyntheticValueSpec::Family::additive:
      return spec.bonus + weight_sum;
    case SyntheticValueSpec::Family::conjunctive: {
      const bool complete = std::includes(subset_sorted.begin(), subset_sorted.end(),
                                          spec.required_set.begin(), spec.required_set.end());
      return spec.base + (complete ? spec.bonus : 0.0) + weight_sum;
    }
    case SyntheticValueSpec::Family::noisy_additive: {
      std::uint64_t h = splitmix64(spec.noise_seed);
      for (int id : subset_sorted) h = splitmix64(h ^ (static_cast<std::uint64_t>(id) + 1));
      const double unit = static_cast<double>(h >> 11) * 0x1.0p-53;
      return spec.bonus + weight_sum + spec.noise_scale * (2.0 * unit - 1.0);
    }
  }
  raise(ErrorKind::invalid_input, "unknown value family");
}

std::string fact_marker(int fact_id) { return "<f" + std::to_string(fact_id) + ">"; }

std::string ask_question(std::span<const int> fact_ids) {
  std::ostringstream out;
  out << "ASK(";
  for (std::size_t i = 0; i < fact_ids.size(); ++i) {
    if (i > 0) out << ',';
    out << fact_ids[i];
  }
  out << ')';
  return out.str();
}

std::vector<int> parse_ask(const std::string& question) {
  const std::size_t open = question.find("ASK(");
  if (open == std::string::npos) return {};
  const std::size_t close = question.find(')', open);
  if (close == std::string::npos) return {};

  std::vector<int> ids;
  int value = 0;
  bool in_number = false;
  for (std::size_t i = open + 4; i < close; ++i) {
    const char c = question[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      value = value * 10 + (c - '0');
      in_number = true;
    } else if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      if (in_number) ids.push_back(value);
      value = 0;
      in_number = false;
    } else {
      return {};  // not a well-formed ASK
    }
  }
  if (in_number) ids.push_back(value);
  return ids;
}

namespace {

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words = {
      "the",  "and",  "this", "that", "with", "have", "does", "what",
      "your", "been", "from", "they", "patient", "about", "there", "which"};
  return words;
}

std::vector<std::string> keywords(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.size() >= 4 && stopwords().count(cur) == 0) out.push_back(cur);
    cur.clear();
  };
  for (char raw : text) {
    const unsigned char c = static_cast<unsigned char>(raw);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

}  // namespace

std::string ScriptedPatient::respond(const std::string& question,
                                     std::span<const AtomicFact> facts) {
  std::vector<int> hits;

  const std::vector<int> asked = parse_ask(question);
  if (!asked.empty()) {
    for (int id : asked) {
      if (id >= 0 && id < static_cast<int>(facts.size())) hits.push_back(id);
    }
  } else {
    const std::vector<std::string> question_words = keywords(question);
    for (const AtomicFact& fact : facts) {
      const std::vector<std::string> fact_words = keywords(fact.text);
      const bool shared = std::any_of(
          question_words.begin(), question_words.end(), [&](const std::string& w) {
            return std::find(fact_words.begin(), fact_words.end(), w) != fact_words.end();
          });
      if (shared) hits.push_back(fact.id);
    }
  }

  std::sort(hits.begin(), hits.end());
  hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
  if (hits.empty()) return std::string(kUnknownReply);

  std::ostringstream out;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (i > 0) out << ' ';
    out << facts[static_cast<std::size_t>(hits[i])].text;
  }
  return out.str();
}

std::set<int> SyntheticPolicy::revealed_ids(const PartialQuestion& partial,
                                            std::span<const DialogueTurn> history) const {
  std::set<int> revealed(partial.revealed_fact_ids.begin(), partial.revealed_fact_ids.end());
  for (const DialogueTurn& turn : history) {
    if (turn.response_text == kUnknownReply) continue;
    for (int id : parse_ask(turn.question_text)) {
      if (id >= 0 && id < kase_->fact_count()) revealed.insert(id);
    }
  }
  return revealed;
}

std::string SyntheticPolicy::understanding(const PartialQuestion& partial,
                                           std::span<const DialogueTurn> history) {
  std::set<int> revealed = revealed_ids(partial, history);
  if (static_cast<int>(history.size()) >= config_.lossy_from_turn) {
    for (int id : config_.lossy_drop_ids) revealed.erase(id);
  }
  std::ostringstream out;
  for (int id : revealed) out << fact_marker(id) << ' ';
  return out.str();
}

void SyntheticPolicy::attach_tokens(PolicyAction& action) {
  action.tokens = whitespace_tokens(action.text);
  if (!config_.emit_logprobs) return;
  const std::uint64_t call_seed = rng_.next_u64();
  std::vector<double> logprobs(action.tokens.size());
  for (std::size_t i = 0; i < action.tokens.size(); ++i) {
    const std::uint64_t h = splitmix64(call_seed ^ fnv1a64(action.tokens[i]) ^ i);
    logprobs[i] = -0.1 - 0.8 * (static_cast<double>(h >> 11) * 0x1.0p-53);
  }
  action.token_logprobs = std::move(logprobs);
}

PolicyAction SyntheticPolicy::make_answer(const std::set<int>& revealed) {
  bool correct = false;
  switch (config_.rule) {
    case AnswerRule::always:
      correct = true;
      break;
    case AnswerRule::never:
      correct = false;
      break;
    case AnswerRule::all_facts:
      correct = static_cast<int>(revealed.size()) == kase_->fact_count();
      break;
    case AnswerRule::required_subset:
      correct = std::all_of(config_.required_set.begin(), config_.required_set.end(),
                            [&](int id) { return revealed.count(id) > 0; });
      break;
  }

  std::string letters;
  if (correct) {
    letters = kase_->gold_answer.letters();
  } else {
    for (const auto& [letter, _] : kase_->options) {
      if (!kase_->gold_answer.contains(letter)) {
        letters = std::string(1, letter);
        break;
      }
    }
    // No wrong option available: emit an unparsable marker, scored incorrect.
  }

  PolicyAction action;
  action.kind = PolicyAction::Kind::answer;
  action.text = "answer: the gathered findings point to this option [answer: " +
                (letters.empty() ? std::string("?") : letters) + "]";
  attach_tokens(action);
  return action;
}

PolicyAction SyntheticPolicy::next_action(const PartialQuestion& partial,
                                          std::span<const DialogueTurn> history,
                                          const ActionOptions& options) {
  const std::set<int> revealed = revealed_ids(partial, history);

  std::vector<int> unrevealed;
  for (int id = 0; id < kase_->fact_count(); ++id) {
    if (revealed.count(id) == 0) unrevealed.push_back(id);
  }

  const bool stochastic = options.temperature > 0.0;
  bool answer_now = options.force_answer || unrevealed.empty();
  if (!answer_now && stochastic) answer_now = rng_.next_bool(config_.p_answer);
  if (answer_now) return make_answer(revealed);

  const std::size_t pick =
      stochastic ? static_cast<std::size_t>(rng_.next_below(unrevealed.size())) : 0;
  const int target = unrevealed[pick];

  PolicyAction action;
  action.kind = PolicyAction::Kind::ask;
  action.text = std::string(kAskMarker) + " " + ask_question(std::span<const int>(&target, 1));
  attach_tokens(action);
  return action;
}

SyntheticCase make_synthetic_case(int index, const SyntheticCaseOptions& options,
                                  std::uint64_t seed) {
  require(options.fact_count >= 1, ErrorKind::invalid_input, "fact_count must be >= 1");
  require(options.option_count >= 2 && options.option_count <= 26, ErrorKind::invalid_input,
          "option_count must be in [2, 26]");

  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(index)));

  auto kase = std::make_shared<PatientCase>();
  {
    std::ostringstream id;
    id << "synth-" << std::setw(4) << std::setfill('0') << index;
    kase->case_id = id.str();
  }
  kase->question_type = "synthetic";
  kase->atomic_question = "Which option is supported by the collected findings?";

  for (int i = 0; i < options.fact_count; ++i) {
    AtomicFact fact;
    fact.id = i;
    fact.text = "Observed attribute" + std::to_string(i) + " with value" +
                std::to_string((i * 7 + index) % 13) + ".";
    kase->facts.push_back(std::move(fact));
  }

  for (int i = 0; i < options.option_count; ++i) {
    const char letter = static_cast<char>('A' + i);
    kase->options[letter] = "candidate option " + std::string(1, letter);
  }
  const char gold = static_cast<char>('A' + static_cast<int>(rng.next_below(
                                                static_cast<std::uint64_t>(options.option_count))));
  kase->gold_answer = OptionSet::from_letters(std::string(1, gold));
  kase->validate();

  SyntheticValueSpec spec;
  spec.family = options.family;
  spec.weights = RealArray::Zero(options.fact_count);
  for (int i = 0; i < options.fact_count; ++i) {
    spec.weights(i) = rng.next_range(options.weight_lo, options.weight_hi);
  }
  spec.bonus = options.bonus;
  spec.base = options.base;
  spec.noise_scale = options.noise_scale;
  spec.noise_seed = rng.next_u64();

  if (options.family == SyntheticValueSpec::Family::conjunctive) {
    const int required = std::min(options.required_count, options.fact_count);
    const int first_eligible = options.required_outside_first_fact && options.fact_count > required ? 1 : 0;
    const int eligible = options.fact_count - first_eligible;
    std::vector<int> picked = rng.sample_without_replacement(eligible, required);
    for (int& id : picked) id += first_eligible;
    std::sort(picked.begin(), picked.end());
    spec.required_set = std::move(picked);
  }

  spec.validate(options.fact_count);
  return SyntheticCase{std::move(kase), std::move(spec)};
}

SyntheticCase make_noise_case(int index, int relevant, int dummies, double bonus,
                              std::uint64_t seed) {
  require(relevant >= 1 && dummies >= 0, ErrorKind::invalid_input,
          "noise case needs >= 1 relevant fact");
  const int total = relevant + dummies;

  Rng rng(derive_seed(seed, 0x6e6f6973ull ^ static_cast<std::uint64_t>(index)));
  std::vector<int> placement = rng.permutation(total);  // placement[i] = position of slot i

  auto kase = std::make_shared<PatientCase>();
  {
    std::ostringstream id;
    id << "noise-" << std::setw(4) << std::setfill('0') << index;
    kase->case_id = id.str();
  }
  kase->question_type = "noise-injection";
  kase->atomic_question = "Which option do the clinically relevant findings support?";
  kase->facts.resize(static_cast<std::size_t>(total));

  std::vector<int> required;
  for (int slot = 0; slot < total; ++slot) {
    const int position = placement[static_cast<std::size_t>(slot)];
    AtomicFact fact;
    fact.id = position;
    if (slot < relevant) {
      fact.text = "Relevant clinical finding sign" + std::to_string(slot) + ".";
      fact.is_relevant = true;
      required.push_back(position);
    } else {
      fact.text = "Irrelevant detail trivia" + std::to_string(slot - relevant) + ".";
      fact.is_relevant = false;
    }
    kase->facts[static_cast<std::size_t>(position)] = std::move(fact);
  }
  std::sort(required.begin(), required.end());

  kase->options['A'] = "candidate option A";
  kase->options['B'] = "candidate option B";
  kase->gold_answer = OptionSet::from_letters("A");
  kase->validate();

  SyntheticValueSpec spec;
  spec.family = SyntheticValueSpec::Family::conjunctive;
  spec.weights = RealArray::Zero(total);
  spec.required_set = std::move(required);
  spec.bonus = bonus;
  spec.base = -4.0;
  spec.validate(total);

  return SyntheticCase{std::move(kase), std::move(spec)};
}

OracleSet make_synthetic_oracles(CasePtr kase, const SyntheticValueSpec& spec,
                                 const SyntheticPolicyConfig& policy_config) {
  OracleSet set;
  set.cache = std::make_shared<MemoCache>();
  set.policy = std::make_shared<SyntheticPolicy>(kase, policy_config);
  set.patient = std::make_shared<ScriptedPatient>();
  set.checker = std::make_shared<CachingChecker>(std::make_shared<MarkerChecker>(), set.cache);
  set.scorer = std::make_shared<CachingScorer>(std::make_shared<SyntheticScorer>(spec), set.cache);
  return set;
}

}  // namespace promed
