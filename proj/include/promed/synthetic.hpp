#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "promed/oracles.hpp"
#include "promed/rng.hpp"

namespace promed {

// Test-environment value functions standing in for a model's answer
// log-probability. `conjunctive` is deliberately submodular-violating: the
// bonus fires only once the full required set is present, which is what
// separates Shapley from leave-one-out attribution.
struct SyntheticValueSpec {
  enum class Family { additive, conjunctive, noisy_additive };

  Family family = Family::additive;
  RealArray weights;               // one per fact
  std::vector<int> required_set;   // conjunctive only, sorted
  double bonus = 0.0;
  double base = 0.0;               // conjunctive offset
  double noise_scale = 0.05;       // noisy-additive jitter amplitude
  std::uint64_t noise_seed = 0;

  void validate(int fact_count) const;
};

double synthetic_value(const SyntheticValueSpec& spec, std::span<const int> subset_sorted);

class SyntheticScorer : public AnswerScorer {
 public:
  explicit SyntheticScorer(SyntheticValueSpec spec) : spec_(std::move(spec)) {}

  double answer_logprob(const PatientCase& kase, std::span<const int> subset) override {
    spec_.validate(kase.fact_count());
    return synthetic_value(spec_, subset);
  }
  OracleCaps caps() const override { return {.max_in_flight = 0, .supports_logprobs = true}; }

  const SyntheticValueSpec& spec() const { return spec_; }

 private:
  SyntheticValueSpec spec_;
};

// Canonical per-fact token used by the synthetic understanding/checker pair.
std::string fact_marker(int fact_id);

// Structured question micro-format. ASK(1,3) names fact ids directly so that
// question meaning is machine-checkable in tests.
std::string ask_question(std::span<const int> fact_ids);
// Parsed ids, or empty if `question` is not in ASK form.
std::vector<int> parse_ask(const std::string& question);

// Answers ASK(id,...) with the named fact texts; free-text questions fall back
// to keyword overlap; otherwise the literal unknown reply.
class ScriptedPatient : public Patient {
 public:
  std::string respond(const std::string& question, std::span<const AtomicFact> facts) override;
};

// Entails iff the fact's canonical marker appears in the understanding text.
class MarkerChecker : public FactChecker {
 public:
  bool entails(const std::string& understanding, const AtomicFact& fact) override {
    return understanding.find(fact_marker(fact.id)) != std::string::npos;
  }
};

// When the policy answers, it emits the gold letters iff the rule holds on the
// facts revealed so far, else a deterministic wrong option.
enum class AnswerRule { always, never, all_facts, required_subset };

struct SyntheticPolicyConfig {
  AnswerRule rule = AnswerRule::all_facts;
  std::vector<int> required_set;    // for AnswerRule::required_subset
  double p_answer = 0.25;           // early-answer probability at temperature > 0
  bool emit_logprobs = false;       // attach deterministic pseudo log-probs
  std::vector<int> lossy_drop_ids;  // facts omitted from articulated understanding
  int lossy_from_turn = 0;          // ...once history reaches this many turns
  std::uint64_t seed = 0;
};

// Deterministic doctor: tracks revealed facts by parsing its own ASK turns,
// asks the lowest unrevealed fact at temperature 0 and a random one otherwise,
// and answers per the configured rule. max_in_flight = 1 (stateful RNG).
class SyntheticPolicy : public Policy {
 public:
  SyntheticPolicy(CasePtr kase, SyntheticPolicyConfig config)
      : kase_(std::move(kase)), config_(std::move(config)), rng_(config_.seed) {}

  PolicyAction next_action(const PartialQuestion& partial,
                           std::span<const DialogueTurn> history,
                           const ActionOptions& options) override;
  std::string understanding(const PartialQuestion& partial,
                            std::span<const DialogueTurn> history) override;
  OracleCaps caps() const override {
    return {.max_in_flight = 1, .supports_logprobs = config_.emit_logprobs};
  }

  // Facts revealed by the partial question plus answered ASK turns.
  std::set<int> revealed_ids(const PartialQuestion& partial,
                             std::span<const DialogueTurn> history) const;

 private:
  PolicyAction make_answer(const std::set<int>& revealed);
  void attach_tokens(PolicyAction& action);

  CasePtr kase_;
  SyntheticPolicyConfig config_;
  Rng rng_;
};

// Deterministic synthetic dataset generation.
struct SyntheticCaseOptions {
  int fact_count = 6;
  int option_count = 4;
  SyntheticValueSpec::Family family = SyntheticValueSpec::Family::conjunctive;
  int required_count = 2;
  double bonus = 1.0;
  double base = -2.0;
  double weight_lo = 0.05;
  double weight_hi = 0.25;
  double noise_scale = 0.05;
  bool required_outside_first_fact = true;  // keep fact 0 out of the required set
};

struct SyntheticCase {
  CasePtr kase;
  SyntheticValueSpec spec;
};

SyntheticCase make_synthetic_case(int index, const SyntheticCaseOptions& options,
                                  std::uint64_t seed);

// Noise-injection instance: `relevant` facts form a conjunctive required set,
// `dummies` are zero-weight distractors; all weights are zero so leave-one-out
// sees nothing. Required ids are placed at seeded positions.
SyntheticCase make_noise_case(int index, int relevant, int dummies, double bonus,
                              std::uint64_t seed);

OracleSet make_synthetic_oracles(CasePtr kase, const SyntheticValueSpec& spec,
                                 const SyntheticPolicyConfig& policy_config);

}  // namespace promed
