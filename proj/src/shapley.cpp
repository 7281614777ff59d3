#include "promed/shapley.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "promed/rng.hpp"

namespace promed {

ShapleyVector exact_shapley(AnswerScorer& scorer, const PatientCase& kase, int subset_limit) {
  const int n = kase.fact_count();
  require(n >= 1, ErrorKind::invalid_input, "case has no facts");
  require(n <= subset_limit, ErrorKind::too_large,
          "exact Shapley refused: " + std::to_string(n) + " facts exceeds subset limit " +
              std::to_string(subset_limit) + "; use Monte Carlo");

  const std::uint32_t full = (1u << n) - 1u;

  // v(S) for every subset, keyed by bitmask.
  std::vector<double> value(static_cast<std::size_t>(full) + 1);
  std::vector<int> ids;
  ids.reserve(static_cast<std::size_t>(n));
  for (std::uint32_t mask = 0; mask <= full; ++mask) {
    ids.clear();
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) ids.push_back(i);
    }
    value[mask] = scorer.answer_logprob(kase, ids);
  }

  // w[s] = s! (n-1-s)! / n!, exact in double for n <= 20.
  std::vector<double> factorial(static_cast<std::size_t>(n) + 1, 1.0);
  for (int i = 1; i <= n; ++i) {
    factorial[static_cast<std::size_t>(i)] = factorial[static_cast<std::size_t>(i - 1)] * i;
  }
  std::vector<double> coalition_weight(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    coalition_weight[static_cast<std::size_t>(s)] =
        factorial[static_cast<std::size_t>(s)] * factorial[static_cast<std::size_t>(n - 1 - s)] /
        factorial[static_cast<std::size_t>(n)];
  }

  ShapleyVector result;
  result.values = RealArray::Zero(n);
  for (std::uint32_t mask = 0; mask <= full; ++mask) {
    const double w = coalition_weight[static_cast<std::size_t>(std::popcount(mask))];
    for (int i = 0; i < n; ++i) {
      const std::uint32_t bit = 1u << i;
      if (mask & bit) continue;
      result.values(i) += w * (value[mask | bit] - value[mask]);
    }
  }

  result.method = ShapleyVector::Method::exact;
  result.converged = true;
  result.v_empty = value[0];
  result.v_full = value[full];
  return result;
}

ShapleyVector mc_shapley(AnswerScorer& scorer, const PatientCase& kase,
                         const McShapleyConfig& config) {
  config.validate();
  const int n = kase.fact_count();
  require(n >= 1, ErrorKind::invalid_input, "case has no facts");

  std::vector<int> all_ids(static_cast<std::size_t>(n));
  std::iota(all_ids.begin(), all_ids.end(), 0);

  auto value_of = [&](std::span<const int> subset, int iteration) {
    try {
      return scorer.answer_logprob(kase, subset);
    } catch (const Error& e) {
      raise(e.kind(), "scorer failed at Monte Carlo iteration " + std::to_string(iteration) +
                          ": " + e.what());
    }
  };

  ShapleyVector result;
  result.method = ShapleyVector::Method::monte_carlo;
  result.values = RealArray::Zero(n);
  result.v_empty = value_of(std::span<const int>{}, 0);
  result.v_full = value_of(all_ids, 0);

  Rng rng(config.seed);
  std::vector<int> prefix;
  prefix.reserve(static_cast<std::size_t>(n));

  for (int k = 1; k <= config.max_iterations; ++k) {
    const RealArray snapshot = result.values;  // phi^(k-1), taken at iteration start

    const std::vector<int> perm = rng.permutation(n);
    prefix.clear();
    double v_prev = result.v_empty;
    for (int j = 0; j < n; ++j) {
      const int i = perm[static_cast<std::size_t>(j)];
      prefix.insert(std::upper_bound(prefix.begin(), prefix.end(), i), i);
      const double v_j = value_of(prefix, k);
      result.values(i) =
          (static_cast<double>(k - 1) / k) * result.values(i) + (v_j - v_prev) / k;
      v_prev = v_j;
      if (config.permutation_early_break && std::abs(v_j - result.v_full) < config.tolerance) {
        break;
      }
    }

    result.iterations_used = k;
    if (k >= 2) {
      const double change = (result.values - snapshot).abs().sum() / (k - 1);
      if (change < config.tolerance) {
        result.converged = true;
        break;
      }
    }
  }
  return result;
}

WeightVector softmax_weights(const ShapleyVector& shapley) {
  const int n = static_cast<int>(shapley.values.size());
  require(n >= 1, ErrorKind::invalid_input, "empty Shapley vector");
  require(shapley.values.isFinite().all(), ErrorKind::invalid_input,
          "non-finite Shapley values");

  const RealArray shifted = (shapley.values - shapley.values.maxCoeff()).exp();
  WeightVector weights{shifted / shifted.sum()};
  return weights;
}

RealArray loo_importance(AnswerScorer& scorer, const PatientCase& kase) {
  const int n = kase.fact_count();
  const double v_empty = scorer.answer_logprob(kase, std::span<const int>{});
  RealArray importance(n);
  for (int i = 0; i < n; ++i) {
    importance(i) = scorer.answer_logprob(kase, std::span<const int>(&i, 1)) - v_empty;
  }
  return importance;
}

double recall_at_k(const RealArray& importances, const std::vector<bool>& relevant_mask,
                   int k) {
  const int n = static_cast<int>(importances.size());
  require(static_cast<int>(relevant_mask.size()) == n, ErrorKind::invalid_input,
          "relevance mask length mismatch");
  require(k >= 1 && k <= n, ErrorKind::invalid_input,
          "k must lie in [1, fact count], got " + std::to_string(k));
  const int relevant_count =
      static_cast<int>(std::count(relevant_mask.begin(), relevant_mask.end(), true));
  require(relevant_count >= 1, ErrorKind::undefined_metric,
          "recall undefined without relevant facts");

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (importances(a) != importances(b)) return importances(a) > importances(b);
    return a < b;
  });

  int hits = 0;
  for (int r = 0; r < k; ++r) {
    if (relevant_mask[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])]) ++hits;
  }
  return static_cast<double>(hits) / std::min(k, relevant_count);
}

ShapleyVector compute_shapley(AnswerScorer& scorer, const PatientCase& kase,
                              const ShapleyOptions& options) {
  if (options.prefer_exact && kase.fact_count() <= options.subset_limit) {
    return exact_shapley(scorer, kase, options.subset_limit);
  }
  return mc_shapley(scorer, kase, options.mc);
}

}  // namespace promed
