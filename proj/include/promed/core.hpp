#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "promed/error.hpp"

namespace promed {

using BoolArray = Eigen::Array<bool, Eigen::Dynamic, 1>;
using RealArray = Eigen::ArrayXd;
using IntArray = Eigen::ArrayXi;

// A minimal, self-contained unit of patient information. `is_relevant` is
// consumed only by the noise-injection harness; injected distractors carry
// false.
struct AtomicFact {
  int id = 0;
  std::string text;
  bool is_relevant = true;
};

// Sorted, deduplicated set of uppercase option letters, e.g. "CD".
class OptionSet {
 public:
  OptionSet() = default;

  static OptionSet from_letters(std::string_view letters);

  const std::string& letters() const { return letters_; }
  bool empty() const { return letters_.empty(); }
  bool contains(char c) const { return letters_.find(c) != std::string::npos; }
  std::string render() const { return letters_; }

  friend bool operator==(const OptionSet&, const OptionSet&) = default;

 private:
  std::string letters_;  // sorted ascending, unique
};

struct PatientCase {
  std::string case_id;
  std::string atomic_question;
  std::vector<AtomicFact> facts;
  std::map<char, std::string> options;
  OptionSet gold_answer;
  std::string question_type;

  int fact_count() const { return static_cast<int>(facts.size()); }
  OptionSet valid_letters() const;

  // Enforces the structural invariants; throws Error(invalid_case).
  void validate() const;
};

using CasePtr = std::shared_ptr<const PatientCase>;

struct PartialQuestion {
  CasePtr kase;
  std::vector<int> revealed_fact_ids;  // sorted ascending
  std::string rendered_text;           // revealed fact texts + atomic question
};

enum class PartialStrategy { first_fact, random_half };

PartialQuestion build_partial_question(CasePtr kase, PartialStrategy strategy,
                                       std::uint64_t seed);

// Explicit reveal set (dataset-provided partial_fact_ids).
PartialQuestion make_partial_question(CasePtr kase, std::vector<int> revealed_ids);

enum class TokenOrigin : std::uint8_t { prompt, question, patient_response, answer };

struct Token {
  std::string text;
  TokenOrigin origin = TokenOrigin::prompt;
};

// Half-open range [begin, end) into a trajectory token stream.
struct TokenSpan {
  int begin = 0;
  int end = 0;

  int size() const { return end - begin; }
  bool empty() const { return end <= begin; }
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

// Per-fact entailment indicator of an understanding state.
struct FactCoverage {
  BoolArray bits;

  static FactCoverage zeros(int n) {
    FactCoverage c;
    c.bits = BoolArray::Constant(n, false);
    return c;
  }
  static FactCoverage from_ids(int n, std::span<const int> ids);

  int size() const { return static_cast<int>(bits.size()); }
  int count() const { return static_cast<int>(bits.count()); }
  friend bool operator==(const FactCoverage& a, const FactCoverage& b) {
    return a.bits.size() == b.bits.size() && (a.bits == b.bits).all();
  }
};

// Elementwise indicator difference in {-1, 0, +1}^|F|.
IntArray coverage_delta(const FactCoverage& prev, const FactCoverage& curr);

struct DialogueTurn {
  std::string question_text;   // q_t body, protocol marker stripped
  std::string response_text;   // r_t
  TokenSpan question_span;     // tokens emitted for this question
  std::optional<double> sig_score;
  std::optional<FactCoverage> coverage_after;
  std::optional<std::string> understanding_after;
  bool unscoreable = false;
};

struct Trajectory {
  PartialQuestion partial;
  std::vector<DialogueTurn> turns;
  std::string final_answer_text;  // raw answer action text (marker included)
  TokenSpan answer_span;
  OptionSet predicted_options;
  std::vector<Token> tokens;
  std::optional<FactCoverage> initial_coverage;     // coverage of U_0
  std::optional<std::string> initial_understanding;
  std::optional<std::vector<double>> token_logprobs;  // aligned; meaningful under mask

  int turn_count() const { return static_cast<int>(turns.size()); }

  // True on tokens tagged question/answer (the model-generated ones).
  std::vector<bool> supervision_mask() const;

  // Asserts that question/answer spans partition exactly the tokens with
  // those origins, with no overlap. Throws Error(invariant_violation).
  void validate_spans() const;
};

// Parses the trailing "[answer: XXX]" marker; falls back to the last
// contiguous run of valid uppercase letters. Unparsable -> empty set.
OptionSet extract_options(const std::string& answer_text, const OptionSet& valid_letters);

// Set equality. `gold` must be non-empty.
bool exact_match(const OptionSet& predicted, const OptionSet& gold);

// Protocol markers of the doctor reply format.
inline constexpr std::string_view kAskMarker = "question:";
inline constexpr std::string_view kAnswerMarker = "answer:";
inline constexpr std::string_view kUnknownReply = "I don't know";

std::vector<std::string> whitespace_tokens(const std::string& text);

// Case-folds, strips punctuation, collapses whitespace; used to deduplicate
// sampled questions.
std::string normalize_question(const std::string& text);

std::string strip_marker(const std::string& text);

}  // namespace promed
