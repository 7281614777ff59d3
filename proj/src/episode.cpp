#include "promed/episode.hpp"

namespace promed {

TrajectoryBuilder::TrajectoryBuilder(PartialQuestion partial) {
  trajectory_.partial = std::move(partial);
  append_plain(trajectory_.partial.rendered_text, TokenOrigin::prompt);
}

void TrajectoryBuilder::set_initial_state(std::string understanding, FactCoverage coverage) {
  trajectory_.initial_understanding = std::move(understanding);
  trajectory_.initial_coverage = std::move(coverage);
}

void TrajectoryBuilder::append_plain(const std::string& text, TokenOrigin origin) {
  for (std::string& tok : whitespace_tokens(text)) {
    trajectory_.tokens.push_back(Token{std::move(tok), origin});
    logprobs_.push_back(0.0);
  }
}

TokenSpan TrajectoryBuilder::append_tokens(const PolicyAction& action, TokenOrigin origin) {
  const std::vector<std::string> tokens =
      action.tokens.empty() ? whitespace_tokens(action.text) : action.tokens;
  require(!tokens.empty(), ErrorKind::invariant_violation,
          "policy action produced no tokens");

  const bool carries = action.token_logprobs.has_value() &&
                       action.token_logprobs->size() == tokens.size();
  if (!carries) all_actions_carry_logprobs_ = false;

  TokenSpan span;
  span.begin = static_cast<int>(trajectory_.tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    trajectory_.tokens.push_back(Token{tokens[i], origin});
    logprobs_.push_back(carries ? (*action.token_logprobs)[i] : 0.0);
  }
  span.end = static_cast<int>(trajectory_.tokens.size());
  return span;
}

void TrajectoryBuilder::add_turn(const PolicyAction& ask_action, const std::string& response) {
  require(!finished_, ErrorKind::invariant_violation, "builder already finished");
  DialogueTurn turn;
  turn.question_text = ask_action.body();
  turn.response_text = response;
  turn.question_span = append_tokens(ask_action, TokenOrigin::question);
  trajectory_.turns.push_back(std::move(turn));
  append_plain(response, TokenOrigin::patient_response);
}

void TrajectoryBuilder::annotate_last_turn(std::string understanding, FactCoverage coverage) {
  require(!trajectory_.turns.empty(), ErrorKind::invariant_violation, "no turn to annotate");
  DialogueTurn& turn = trajectory_.turns.back();
  turn.understanding_after = std::move(understanding);
  turn.coverage_after = std::move(coverage);
}

Trajectory TrajectoryBuilder::finish(const PolicyAction& answer_action) {
  require(!finished_, ErrorKind::invariant_violation, "builder already finished");
  finished_ = true;
  trajectory_.final_answer_text = answer_action.text;
  trajectory_.answer_span = append_tokens(answer_action, TokenOrigin::answer);
  trajectory_.predicted_options =
      extract_options(answer_action.text, trajectory_.partial.kase->valid_letters());
  if (all_actions_carry_logprobs_) trajectory_.token_logprobs = logprobs_;
  trajectory_.validate_spans();
  return std::move(trajectory_);
}

PolicyAction ensure_answer(PolicyAction action) {
  if (action.kind != PolicyAction::Kind::answer) action.kind = PolicyAction::Kind::answer;
  return action;
}

Trajectory run_episode(Policy& policy, Patient& patient, FactChecker* checker,
                       const PartialQuestion& partial, const EpisodeOptions& options) {
  require(options.depth_limit >= 0, ErrorKind::invalid_input, "negative depth limit");
  const PatientCase& kase = *partial.kase;
  const bool annotate = options.annotate_coverage && checker != nullptr;

  TrajectoryBuilder builder(partial);
  if (annotate) {
    const std::string u0 = policy.understanding(partial, {});
    builder.set_initial_state(u0, fact_coverage(*checker, u0, kase.facts));
  }

  while (true) {
    const bool force = builder.turn_count() >= options.depth_limit;
    PolicyAction action = policy.next_action(
        partial, builder.turns(), ActionOptions{force, options.temperature});
    if (force) action = ensure_answer(std::move(action));
    if (action.kind == PolicyAction::Kind::answer) {
      return builder.finish(action);
    }

    const std::string response = patient.respond(action.body(), kase.facts);
    builder.add_turn(action, response);
    if (annotate) {
      const std::string u = policy.understanding(partial, builder.turns());
      builder.annotate_last_turn(u, fact_coverage(*checker, u, kase.facts));
    }
  }
}

}  // namespace promed
