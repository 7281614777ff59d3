#pragma once

#include <memory>

#include "promed/episode.hpp"

namespace promed {

struct McstConfig {
  double exploration_c = 2.2;
  double uct_epsilon = 1e-6;
  int max_width = 8;
  int iterations = 5;
  int max_depth = 10;
  double temperature = 1.0;
  // Attempts at a novel (non-duplicate) question before the node counts as
  // fully expanded.
  int novel_attempts = 3;

  void validate() const {
    require(exploration_c >= 0.0 && uct_epsilon > 0.0 && max_width >= 1 &&
                iterations >= 1 && max_depth >= 0 && novel_attempts >= 1,
            ErrorKind::invalid_input, "invalid MCTS configuration");
  }
};

// Dialogue-tree node. Root holds only Q_p; interior nodes one (q_t, r_t);
// terminal nodes a final answer.
struct McstNode {
  std::optional<DialogueTurn> turn;  // absent on root
  PolicyAction action;               // the generating action (question or answer)
  std::vector<std::unique_ptr<McstNode>> children;
  McstNode* parent = nullptr;
  int depth = 0;  // turns taken to reach this state

  int visit_count = 0;
  double total_reward = 0.0;
  bool is_terminal = false;
  std::optional<double> local_sig;
  std::optional<std::size_t> trajectory_index;  // terminal nodes only

  // Cached state for SIG at expansion time.
  std::string understanding;
  FactCoverage coverage;
  std::string normalized_text;  // dedup key of the generating action
  bool no_novel = false;        // policy stopped producing novel questions here

  double mean_reward() const {
    return visit_count > 0 ? total_reward / visit_count : 0.0;
  }
};

// UCT(n') = mean(n') + c * sqrt(ln N(n) / (N(n') + eps)); unvisited children
// read mean 0 and a large finite exploration bonus via eps.
double uct_score(const McstNode& node, int parent_visits, const McstConfig& config);

struct SearchResult {
  std::unique_ptr<McstNode> root;
  std::vector<Trajectory> trajectories;  // all completed rollouts
  std::vector<ScoreResult> scores;       // aligned with trajectories
  std::optional<std::size_t> best_index; // answer-correct argmax R(tau)
  WeightVector weights;
  int discarded_rollouts = 0;  // oracle failures mid-rollout

  const Trajectory* best() const {
    return best_index ? &trajectories[*best_index] : nullptr;
  }
};

// SIG-guided MCTS over dialogue trees: select by UCT, expand one action,
// roll out to an answer (forced at max_depth), backpropagate R(tau) along the
// selected path. Fact weights are derived from the scorer once per search.
SearchResult run_mcts(Policy& policy, Patient& patient, FactChecker& checker,
                      AnswerScorer& scorer, const PartialQuestion& partial,
                      const SigParams& sig_params, const McstConfig& config,
                      const ShapleyOptions& shapley_options = {});

// Training-ready record of one retained trajectory: chat transcript plus the
// token stream with its supervision mask (1 exactly on question/answer tokens).
struct SftRecord {
  struct Message {
    std::string role;  // system | assistant | user
    std::string content;
    bool supervised = false;
  };

  std::string case_id;
  std::string trajectory_id;
  std::vector<Message> messages;
  std::vector<std::string> tokens;
  std::vector<bool> mask;
  double r_tau = 0.0;
};

struct SftExport {
  std::vector<SftRecord> records;
  int skipped_cases = 0;  // searches without an answer-correct trajectory
};

SftExport export_sft(std::span<const SearchResult> results);

// Single-trajectory record used by both export paths.
SftRecord make_sft_record(const Trajectory& trajectory, double r_tau,
                          const std::string& trajectory_id);

}  // namespace promed
