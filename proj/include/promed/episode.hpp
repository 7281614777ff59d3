#pragma once

#include "promed/oracles.hpp"
#include "promed/sig.hpp"

namespace promed {

// Assembles a Trajectory turn by turn, maintaining the token stream, spans,
// and aligned per-token log-probs. Span invariants are validated on finish().
class TrajectoryBuilder {
 public:
  explicit TrajectoryBuilder(PartialQuestion partial);

  void set_initial_state(std::string understanding, FactCoverage coverage);

  // Appends the question tokens (span recorded) and the patient response.
  void add_turn(const PolicyAction& ask_action, const std::string& response);

  void annotate_last_turn(std::string understanding, FactCoverage coverage);

  const std::vector<DialogueTurn>& turns() const { return trajectory_.turns; }
  int turn_count() const { return trajectory_.turn_count(); }

  Trajectory finish(const PolicyAction& answer_action);

 private:
  TokenSpan append_tokens(const PolicyAction& action, TokenOrigin origin);
  void append_plain(const std::string& text, TokenOrigin origin);

  Trajectory trajectory_;
  std::vector<double> logprobs_;
  bool all_actions_carry_logprobs_ = true;
  bool finished_ = false;
};

struct EpisodeOptions {
  int depth_limit = 10;
  double temperature = 0.0;
  // Record understanding/coverage snapshots after every turn (needs checker).
  bool annotate_coverage = true;
};

// One complete consultation: prompt, ask/respond turns up to the depth limit
// (answer forced there), terminal answer. The checker may be null when
// annotation is off.
Trajectory run_episode(Policy& policy, Patient& patient, FactChecker* checker,
                       const PartialQuestion& partial, const EpisodeOptions& options);

// Engine-side enforcement of the question budget: an ask returned despite the
// forced-answer flag is reinterpreted as an answer (protocol deviation).
PolicyAction ensure_answer(PolicyAction action);

}  // namespace promed
