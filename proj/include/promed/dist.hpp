#pragma once

#include "promed/episode.hpp"

namespace promed {

// Reward-distribution coefficients for policy optimization. lambda_q +
// lambda_a = alpha so the correctness reward is preserved across actions.
struct DistParams {
  double alpha = 4.0;
  double beta = 2.0;
  double lambda_q = 1.0;
  double lambda_a = 3.0;

  void validate() const {
    require(alpha >= 0.0 && beta >= 0.0 && lambda_q >= 0.0 && lambda_a >= 0.0,
            ErrorKind::invalid_input, "distribution coefficients must be non-negative");
    require(std::abs(lambda_q + lambda_a - alpha) <= 1e-9, ErrorKind::invalid_input,
            "lambda_q + lambda_a must equal alpha");
  }
};

// Action-level decomposition of R(tau); conservation is asserted on
// construction: sum_t R(q_t) + R(A') = R(tau) to 1e-9.
struct ActionRewardBreakdown {
  RealArray question_rewards;  // R(q_t)
  double answer_reward = 0.0;  // R(A')
  RealArray weights;           // w_t
  double r_tau = 0.0;
  bool correct = false;
};

// R(q_t) = beta * SIG(q_t) + lambda_q * w_t * 1(correct), with
// w_t = sig+(q_t) / sum_j sig+(q_j) (uniform fallback when the positive mass
// is zero; the lambda_q mass folds into the answer when T = 0), and
// R(A') = lambda_a * 1(correct). Uses the turn SIGs in `score`; R(tau) is
// re-derived with the distribution coefficients.
ActionRewardBreakdown distribute(const Trajectory& trajectory, const ScoreResult& score,
                                 const DistParams& params);

// Per-token rewards aligned to the trajectory token stream: tokens inside a
// question span inherit R(q_t), answer tokens R(A'), everything else 0.
struct TokenRewardVector {
  RealArray rewards;
  std::vector<bool> mask;  // true on question/answer tokens
};

TokenRewardVector token_rewards(const Trajectory& trajectory,
                                const ActionRewardBreakdown& breakdown);

// Group-relative token advantages: masked rewards pooled across the group are
// normalized by their mean and population std. All-zero advantages when the
// std guard fires.
struct GroupAdvantages {
  std::vector<RealArray> per_trajectory;  // aligned to each token stream, 0 off-mask
  double mean = 0.0;
  double stddev = 0.0;
  bool guard_fired = false;
};

inline constexpr double kStdGuard = 1e-8;

GroupAdvantages group_advantages(std::span<const TokenRewardVector> group);

// Inputs of the clipped surrogate; per trajectory, arrays are aligned to its
// token stream and read under the mask.
struct ObjectiveInputs {
  std::vector<std::vector<bool>> masks;
  std::vector<RealArray> advantages;
  std::vector<RealArray> logp_old;
  std::vector<RealArray> logp_new;
};

// (1/K) sum_k (1/|tau_k|) sum_i min(r A, clip(r, 1-eps, 1+eps) A) with
// r = exp(logp_new - logp_old). |tau_k| counts masked tokens unless
// count_all_tokens is set (ablation mode).
double clipped_objective(const ObjectiveInputs& inputs, double clip_eps,
                         bool count_all_tokens = false);

struct GroupSample {
  std::vector<Trajectory> trajectories;
  bool under_filled = false;  // oracle failures left fewer than K rollouts
};

// K independent rollouts at sampling temperature, each ending in an answer
// (forced at the depth limit). Coverage snapshots are recorded when a checker
// is supplied so the group can be scored offline.
GroupSample sample_group(Policy& policy, Patient& patient, FactChecker* checker,
                         const PartialQuestion& partial, int group_size,
                         const EpisodeOptions& options);

}  // namespace promed
