#include "promed/sig.hpp"

namespace promed {

FactCoverage fact_coverage(FactChecker& checker, const std::string& understanding,
                           std::span<const AtomicFact> facts) {
  FactCoverage coverage = FactCoverage::zeros(static_cast<int>(facts.size()));
  for (std::size_t i = 0; i < facts.size(); ++i) {
    coverage.bits(static_cast<Eigen::Index>(i)) = checker.entails(understanding, facts[i]);
  }
  return coverage;
}

double information_gain(const FactCoverage& prev, const FactCoverage& curr) {
  const IntArray delta = coverage_delta(prev, curr);
  require(delta.size() >= 1, ErrorKind::invalid_input, "empty coverage");
  return delta.cast<double>().sum() / static_cast<double>(delta.size());
}

double sig_score(const WeightVector& weights, const FactCoverage& prev,
                 const FactCoverage& curr) {
  const IntArray delta = coverage_delta(prev, curr);
  require(weights.size() == static_cast<int>(delta.size()), ErrorKind::invariant_violation,
          "weight/coverage length mismatch");
  return (weights.weights * delta.cast<double>()).sum();
}

ScoreResult score_trajectory(Trajectory& trajectory, const WeightVector& weights,
                             const SigParams& params, Policy* policy, FactChecker* checker) {
  params.validate();
  const PatientCase& kase = *trajectory.partial.kase;
  const bool have_oracles = policy != nullptr && checker != nullptr;

  // Coverage at t = 0 comes from an understanding over the empty history, so
  // the first question is credited only for facts beyond F_p.
  if (!trajectory.initial_coverage) {
    require(have_oracles, ErrorKind::invalid_input,
            "trajectory lacks initial coverage and no oracles were supplied");
    const std::string u0 = policy->understanding(trajectory.partial, {});
    trajectory.initial_coverage = fact_coverage(*checker, u0, kase.facts);
    trajectory.initial_understanding = u0;
  }

  ScoreResult result;
  FactCoverage prev = *trajectory.initial_coverage;

  for (std::size_t t = 0; t < trajectory.turns.size(); ++t) {
    DialogueTurn& turn = trajectory.turns[t];
    TurnScore score;
    score.coverage_before = prev;

    if (!turn.coverage_after && have_oracles) {
      try {
        const std::span<const DialogueTurn> prefix(trajectory.turns.data(), t + 1);
        const std::string u = policy->understanding(trajectory.partial, prefix);
        turn.coverage_after = fact_coverage(*checker, u, kase.facts);
        turn.understanding_after = u;
      } catch (const Error&) {
        // fall through to the unscoreable branch
      }
    }

    if (!turn.coverage_after) {
      turn.unscoreable = true;
      score.unscoreable = true;
      score.coverage_after = prev;  // no evidence of change
      turn.sig_score = 0.0;
    } else {
      score.coverage_after = *turn.coverage_after;
      score.ig = information_gain(prev, score.coverage_after);
      score.sig = sig_score(weights, prev, score.coverage_after);
      turn.sig_score = score.sig;
      const IntArray delta = coverage_delta(prev, score.coverage_after);
      for (int i = 0; i < delta.size(); ++i) {
        if (delta(i) > 0) score.new_facts.push_back(i);
        if (delta(i) < 0) score.lost_facts.push_back(i);
      }
      prev = score.coverage_after;
    }

    result.sig_sum += score.sig;
    result.turns.push_back(std::move(score));
  }

  result.correct = exact_match(trajectory.predicted_options, kase.gold_answer);
  result.r_tau = params.alpha * (result.correct ? 1.0 : 0.0) + params.beta * result.sig_sum;
  return result;
}

}  // namespace promed
