#pragma once

#include "promed/oracles.hpp"
#include "promed/shapley.hpp"

namespace promed {

// Outcome (alpha) and process (beta) reward coefficients of the trajectory
// reward. Sampling-stage defaults; policy optimization uses DistParams.
struct SigParams {
  double alpha = 2.0;
  double beta = 1.0;

  void validate() const {
    require(alpha >= 0.0 && beta >= 0.0, ErrorKind::invalid_input,
            "SIG coefficients must be non-negative");
  }
};

struct TurnScore {
  double ig = 0.0;
  double sig = 0.0;
  FactCoverage coverage_before;
  FactCoverage coverage_after;
  std::vector<int> new_facts;
  std::vector<int> lost_facts;
  bool unscoreable = false;
};

struct ScoreResult {
  double r_tau = 0.0;
  bool correct = false;
  double sig_sum = 0.0;
  std::vector<TurnScore> turns;
};

// bits_i = checker.entails(understanding, f_i). Memoization comes from the
// CachingChecker wrapper.
FactCoverage fact_coverage(FactChecker& checker, const std::string& understanding,
                           std::span<const AtomicFact> facts);

// Unweighted coverage change: (1/n) * sum_i (curr_i - prev_i).
double information_gain(const FactCoverage& prev, const FactCoverage& curr);

// Importance-weighted coverage change: sum_i w_i * (curr_i - prev_i).
double sig_score(const WeightVector& weights, const FactCoverage& prev,
                 const FactCoverage& curr);

// Scores a trajectory in place: per-turn SIG from coverage snapshots (produced
// via the oracles when a turn lacks them), then
// R(tau) = alpha * 1(correct) + beta * sum_t SIG(q_t).
// Unscoreable turns contribute 0 and are flagged rather than aborting.
// Idempotent: snapshots written on first scoring are reused afterwards.
ScoreResult score_trajectory(Trajectory& trajectory, const WeightVector& weights,
                             const SigParams& params, Policy* policy = nullptr,
                             FactChecker* checker = nullptr);

}  // namespace promed
