#pragma once

#include <cstdint>

#include "promed/oracles.hpp"

namespace promed {

// Per-fact attribution phi(f_i) with provenance.
struct ShapleyVector {
  enum class Method { exact, monte_carlo };

  RealArray values;
  Method method = Method::exact;
  int iterations_used = 0;  // permutations consumed (monte carlo only)
  bool converged = false;   // exact: always; MC: outer tolerance fired before K
  double v_empty = 0.0;
  double v_full = 0.0;
};

// Softmax-normalized attribution weights; strictly positive, sum to 1.
struct WeightVector {
  RealArray weights;

  int size() const { return static_cast<int>(weights.size()); }
  static WeightVector uniform(int n) {
    return WeightVector{RealArray::Constant(n, 1.0 / n)};
  }
};

struct McShapleyConfig {
  int max_iterations = 200;
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
  // Inner break: stop walking a permutation once v reaches v_full within
  // tolerance. Skipped facts keep their running average for that iteration.
  bool permutation_early_break = true;

  void validate() const {
    require(max_iterations >= 1, ErrorKind::invalid_input, "max_iterations must be >= 1");
    require(tolerance > 0.0, ErrorKind::invalid_input, "tolerance must be positive");
  }
};

// Full subset enumeration with factorial weights. Refuses above subset_limit;
// use mc_shapley there.
ShapleyVector exact_shapley(AnswerScorer& scorer, const PatientCase& kase,
                            int subset_limit = 12);

// Permutation-sampling estimate with online averaging, inner early break on
// |v_j - v_full| and outer stop on the mean estimate change.
ShapleyVector mc_shapley(AnswerScorer& scorer, const PatientCase& kase,
                         const McShapleyConfig& config);

WeightVector softmax_weights(const ShapleyVector& shapley);

// Leave-one-out baseline: importance_i = v({f_i}) - v(empty).
RealArray loo_importance(AnswerScorer& scorer, const PatientCase& kase);

// Fraction of relevant facts among the top-k by importance (ties broken by
// ascending fact id), normalized by min(k, #relevant).
double recall_at_k(const RealArray& importances, const std::vector<bool>& relevant_mask,
                   int k);

// How commands derive SIG weights from a scorer.
struct ShapleyOptions {
  bool prefer_exact = true;  // exact when |F| <= subset_limit, else Monte Carlo
  int subset_limit = 12;
  McShapleyConfig mc;
};

ShapleyVector compute_shapley(AnswerScorer& scorer, const PatientCase& kase,
                              const ShapleyOptions& options);

inline WeightVector compute_fact_weights(AnswerScorer& scorer, const PatientCase& kase,
                                         const ShapleyOptions& options) {
  return softmax_weights(compute_shapley(scorer, kase, options));
}

}  // namespace promed
