#include "promed/dist.hpp"

#include <algorithm>
#include <cmath>

namespace promed {

ActionRewardBreakdown distribute(const Trajectory& trajectory, const ScoreResult& score,
                                 const DistParams& params) {
  params.validate();
  const int turn_count = trajectory.turn_count();
  require(static_cast<int>(score.turns.size()) == turn_count, ErrorKind::invalid_input,
          "score does not match trajectory turn count");

  ActionRewardBreakdown breakdown;
  breakdown.correct = score.correct;
  const double correct = score.correct ? 1.0 : 0.0;

  RealArray sig(turn_count);
  for (int t = 0; t < turn_count; ++t) sig(t) = score.turns[static_cast<std::size_t>(t)].sig;
  breakdown.r_tau = params.alpha * correct + params.beta * sig.sum();

  if (turn_count == 0) {
    breakdown.question_rewards = RealArray(0);
    breakdown.weights = RealArray(0);
    // The lambda_q share of the correctness mass has no question to land on;
    // conservation forces it into the answer.
    breakdown.answer_reward = (params.lambda_a + params.lambda_q) * correct;
  } else {
    const RealArray sig_positive = sig.max(0.0);
    const double positive_mass = sig_positive.sum();
    breakdown.weights = positive_mass > 0.0
                            ? RealArray(sig_positive / positive_mass)
                            : RealArray::Constant(turn_count, 1.0 / turn_count);
    breakdown.question_rewards =
        params.beta * sig + params.lambda_q * correct * breakdown.weights;
    breakdown.answer_reward = params.lambda_a * correct;
  }

  const double redistributed = breakdown.question_rewards.sum() + breakdown.answer_reward;
  require(std::abs(redistributed - breakdown.r_tau) <= 1e-9, ErrorKind::invariant_violation,
          "reward conservation violated by " +
              std::to_string(std::abs(redistributed - breakdown.r_tau)));
  return breakdown;
}

TokenRewardVector token_rewards(const Trajectory& trajectory,
                                const ActionRewardBreakdown& breakdown) {
  trajectory.validate_spans();
  require(static_cast<int>(breakdown.question_rewards.size()) == trajectory.turn_count(),
          ErrorKind::invalid_input, "breakdown does not match trajectory");

  TokenRewardVector out;
  out.rewards = RealArray::Zero(static_cast<Eigen::Index>(trajectory.tokens.size()));
  out.mask = trajectory.supervision_mask();

  for (int t = 0; t < trajectory.turn_count(); ++t) {
    const TokenSpan& span = trajectory.turns[static_cast<std::size_t>(t)].question_span;
    for (int i = span.begin; i < span.end; ++i) out.rewards(i) = breakdown.question_rewards(t);
  }
  for (int i = trajectory.answer_span.begin; i < trajectory.answer_span.end; ++i) {
    out.rewards(i) = breakdown.answer_reward;
  }
  return out;
}

GroupAdvantages group_advantages(std::span<const TokenRewardVector> group) {
  require(group.size() >= 2, ErrorKind::degenerate_group,
          "group-relative advantages need at least 2 trajectories");

  std::size_t pooled_count = 0;
  double sum = 0.0;
  for (const TokenRewardVector& trajectory : group) {
    require(static_cast<std::size_t>(trajectory.rewards.size()) == trajectory.mask.size(),
            ErrorKind::invalid_input, "reward/mask length mismatch");
    for (std::size_t i = 0; i < trajectory.mask.size(); ++i) {
      if (!trajectory.mask[i]) continue;
      sum += trajectory.rewards(static_cast<Eigen::Index>(i));
      ++pooled_count;
    }
  }
  require(pooled_count >= 2, ErrorKind::degenerate_group,
          "group-relative advantages need at least 2 masked tokens");

  GroupAdvantages out;
  out.mean = sum / static_cast<double>(pooled_count);

  double squared = 0.0;
  for (const TokenRewardVector& trajectory : group) {
    for (std::size_t i = 0; i < trajectory.mask.size(); ++i) {
      if (!trajectory.mask[i]) continue;
      const double d = trajectory.rewards(static_cast<Eigen::Index>(i)) - out.mean;
      squared += d * d;
    }
  }
  out.stddev = std::sqrt(squared / static_cast<double>(pooled_count));  // population
  out.guard_fired = out.stddev < kStdGuard;

  for (const TokenRewardVector& trajectory : group) {
    RealArray advantages = RealArray::Zero(trajectory.rewards.size());
    if (!out.guard_fired) {
      for (std::size_t i = 0; i < trajectory.mask.size(); ++i) {
        if (!trajectory.mask[i]) continue;
        advantages(static_cast<Eigen::Index>(i)) =
            (trajectory.rewards(static_cast<Eigen::Index>(i)) - out.mean) / out.stddev;
      }
    }
    out.per_trajectory.push_back(std::move(advantages));
  }
  return out;
}

double clipped_objective(const ObjectiveInputs& inputs, double clip_eps,
                         bool count_all_tokens) {
  require(clip_eps > 0.0, ErrorKind::invalid_input, "clip epsilon must be positive");
  const std::size_t group_size = inputs.masks.size();
  require(group_size >= 1, ErrorKind::invalid_input, "empty group");
  require(inputs.advantages.size() == group_size && inputs.logp_old.size() == group_size &&
              inputs.logp_new.size() == group_size,
          ErrorKind::invalid_input, "objective inputs disagree on group size");

  double objective = 0.0;
  for (std::size_t k = 0; k < group_size; ++k) {
    const std::vector<bool>& mask = inputs.masks[k];
    const Eigen::Index length = static_cast<Eigen::Index>(mask.size());
    require(inputs.advantages[k].size() == length && inputs.logp_old[k].size() == length &&
                inputs.logp_new[k].size() == length,
            ErrorKind::capability_missing,
            "per-token log-probs missing for trajectory " + std::to_string(k));

    double trajectory_sum = 0.0;
    std::size_t masked_count = 0;
    for (Eigen::Index i = 0; i < length; ++i) {
      if (!mask[static_cast<std::size_t>(i)]) continue;
      ++masked_count;
      const double advantage = inputs.advantages[k](i);
      const double ratio = std::exp(inputs.logp_new[k](i) - inputs.logp_old[k](i));
      const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
      trajectory_sum += std::min(ratio * advantage, clipped * advantage);
    }

    const std::size_t denom = count_all_tokens ? static_cast<std::size_t>(length) : masked_count;
    require(denom >= 1, ErrorKind::invalid_input,
            "trajectory " + std::to_string(k) + " has no tokens to average over");
    objective += trajectory_sum / static_cast<double>(denom);
  }
  return objective / static_cast<double>(group_size);
}

GroupSample sample_group(Policy& policy, Patient& patient, FactChecker* checker,
                         const PartialQuestion& partial, int group_size,
                         const EpisodeOptions& options) {
  require(group_size >= 2, ErrorKind::invalid_input, "group size must be >= 2");

  GroupSample out;
  for (int k = 0; k < group_size; ++k) {
    try {
      out.trajectories.push_back(run_episode(policy, patient, checker, partial, options));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::invalid_input || e.kind() == ErrorKind::invariant_violation) {
        throw;
      }
      out.under_filled = true;
    }
  }
  return out;
}

}  // namespace promed
