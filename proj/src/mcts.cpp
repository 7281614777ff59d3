#include "promed/mcts.hpp"

#include <algorithm>
#include <cmath>

namespace promed {

double uct_score(const McstNode& node, int parent_visits, const McstConfig& config) {
  require(parent_visits >= 1, ErrorKind::invalid_input, "parent must have been visited");
  const double exploration =
      std::sqrt(std::log(static_cast<double>(parent_visits)) /
                (static_cast<double>(node.visit_count) + config.uct_epsilon));
  return node.mean_reward() + config.exploration_c * exploration;
}

namespace {

bool fully_expanded(const McstNode& node, const McstConfig& config) {
  return node.no_novel || static_cast<int>(node.children.size()) >= config.max_width;
}

McstNode* select_child(McstNode& node, const McstConfig& config) {
  McstNode* best = nullptr;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& child : node.children) {
    const double score = uct_score(*child, std::max(node.visit_count, 1), config);
    if (score > best_score) {
      best_score = score;
      best = child.get();
    }
  }
  return best;
}

std::string dedup_key(const PolicyAction& action) {
  const std::string body =
      action.kind == PolicyAction::Kind::ask ? action.body() : action.text;
  return (action.kind == PolicyAction::Kind::ask ? "q|" : "a|") + normalize_question(body);
}

McstNode* find_child(McstNode& node, const std::string& key) {
  for (const auto& child : node.children) {
    if (child->normalized_text == key) return child.get();
  }
  return nullptr;
}

void backpropagate(std::span<McstNode* const> path, double reward) {
  for (McstNode* node : path) {
    node->visit_count += 1;
    node->total_reward += reward;
  }
}

}  // namespace

SearchResult run_mcts(Policy& policy, Patient& patient, FactChecker& checker,
                      AnswerScorer& scorer, const PartialQuestion& partial,
                      const SigParams& sig_params, const McstConfig& config,
                      const ShapleyOptions& shapley_options) {
  config.validate();
  sig_params.validate();
  const PatientCase& kase = *partial.kase;

  SearchResult result;
  result.weights = compute_fact_weights(scorer, kase, shapley_options);

  result.root = std::make_unique<McstNode>();
  result.root->understanding = policy.understanding(partial, {});
  result.root->coverage = fact_coverage(checker, result.root->understanding, kase.facts);

  double best_reward = -std::numeric_limits<double>::infinity();

  for (int iteration = 0; iteration < config.iterations; ++iteration) {
    // Selection: descend while fully expanded and not terminal.
    McstNode* node = result.root.get();
    std::vector<McstNode*> path{node};
    while (!node->is_terminal && fully_expanded(*node, config) && !node->children.empty()) {
      node = select_child(*node, config);
      path.push_back(node);
    }

    if (node->is_terminal) {
      backpropagate(path, result.scores[*node->trajectory_index].r_tau);
      continue;
    }

    try {
      std::vector<DialogueTurn> history;
      for (McstNode* n : path) {
        if (n->turn) history.push_back(*n->turn);
      }

      // Expansion: sample one action, deduplicating repeated questions.
      const bool force = node->depth >= config.max_depth;
      PolicyAction action;
      McstNode* child = nullptr;
      for (int attempt = 0; attempt < config.novel_attempts; ++attempt) {
        action = policy.next_action(partial, history,
                                    ActionOptions{force, config.temperature});
        if (force) action = ensure_answer(std::move(action));
        McstNode* existing = find_child(*node, dedup_key(action));
        if (existing == nullptr) break;
        child = existing;
        if (attempt + 1 == config.novel_attempts) node->no_novel = true;
      }

      if (child == nullptr) {
        auto fresh = std::make_unique<McstNode>();
        fresh->parent = node;
        fresh->depth = node->depth + 1;
        fresh->action = action;
        fresh->normalized_text = dedup_key(action);
        if (action.kind == PolicyAction::Kind::ask) {
          DialogueTurn turn;
          turn.question_text = action.body();
          turn.response_text = patient.respond(turn.question_text, kase.facts);
          history.push_back(turn);
          fresh->understanding = policy.understanding(partial, history);
          fresh->coverage = fact_coverage(checker, fresh->understanding, kase.facts);
          fresh->local_sig = sig_score(result.weights, node->coverage, fresh->coverage);
          turn.understanding_after = fresh->understanding;
          turn.coverage_after = fresh->coverage;
          turn.sig_score = fresh->local_sig;
          history.pop_back();
          fresh->turn = std::move(turn);
        } else {
          fresh->is_terminal = true;
        }
        child = fresh.get();
        node->children.push_back(std::move(fresh));
      } else if (child->is_terminal) {
        // Duplicate of an existing answer leaf: replay its stored reward.
        path.push_back(child);
        backpropagate(path, result.scores[*child->trajectory_index].r_tau);
        continue;
      }
      path.push_back(child);

      // Simulation: roll out below the expanded node until an answer.
      TrajectoryBuilder builder(partial);
      builder.set_initial_state(result.root->understanding, result.root->coverage);
      PolicyAction answer_action;
      bool have_answer = false;
      for (McstNode* n : path) {
        if (n->is_terminal) {
          answer_action = n->action;
          have_answer = true;
        } else if (n->turn) {
          builder.add_turn(n->action, n->turn->response_text);
          builder.annotate_last_turn(n->understanding, n->coverage);
        }
      }
      while (!have_answer) {
        const bool force_now = builder.turn_count() >= config.max_depth;
        PolicyAction next = policy.next_action(partial, builder.turns(),
                                               ActionOptions{force_now, config.temperature});
        if (force_now) next = ensure_answer(std::move(next));
        if (next.kind == PolicyAction::Kind::answer) {
          answer_action = std::move(next);
          have_answer = true;
          break;
        }
        const std::string response = patient.respond(next.body(), kase.facts);
        builder.add_turn(next, response);
        const std::string u = policy.understanding(partial, builder.turns());
        builder.annotate_last_turn(u, fact_coverage(checker, u, kase.facts));
      }

      Trajectory trajectory = builder.finish(answer_action);
      ScoreResult score = score_trajectory(trajectory, result.weights, sig_params);

      const std::size_t index = result.trajectories.size();
      result.trajectories.push_back(std::move(trajectory));
      result.scores.push_back(score);
      if (child->is_terminal && !child->trajectory_index) child->trajectory_index = index;

      backpropagate(path, score.r_tau);

      if (score.correct && score.r_tau > best_reward) {
        best_reward = score.r_tau;
        result.best_index = index;
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::invalid_input || e.kind() == ErrorKind::invariant_violation) {
        throw;  // engine bugs must not be silently swallowed
      }
      result.discarded_rollouts += 1;
    }
  }

  return result;
}

SftRecord make_sft_record(const Trajectory& trajectory, double r_tau,
                          const std::string& trajectory_id) {
  SftRecord record;
  record.case_id = trajectory.partial.kase->case_id;
  record.trajectory_id = trajectory_id;
  record.r_tau = r_tau;

  record.messages.push_back({"system", trajectory.partial.rendered_text, false});
  for (const DialogueTurn& turn : trajectory.turns) {
    record.messages.push_back(
        {"assistant", std::string(kAskMarker) + " " + turn.question_text, true});
    record.messages.push_back({"user", turn.response_text, false});
  }
  record.messages.push_back({"assistant", trajectory.final_answer_text, true});

  record.tokens.reserve(trajectory.tokens.size());
  for (const Token& token : trajectory.tokens) record.tokens.push_back(token.text);
  record.mask = trajectory.supervision_mask();
  return record;
}

SftExport export_sft(std::span<const SearchResult> results) {
  SftExport out;
  for (const SearchResult& search : results) {
    if (!search.best_index) {
      out.skipped_cases += 1;
      continue;
    }
    const Trajectory& best = search.trajectories[*search.best_index];
    best.validate_spans();
    out.records.push_back(make_sft_record(
        best, search.scores[*search.best_index].r_tau,
        best.partial.kase->case_id + "#" + std::to_string(*search.best_index)));
  }
  return out;
}

}  // namespace promed
