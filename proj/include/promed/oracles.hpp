#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "promed/core.hpp"

namespace promed {

// One generated doctor action: either a follow-up question or a final answer,
// carried in protocol form ("question: ..." / "answer: ... [answer: X]").
struct PolicyAction {
  enum class Kind { ask, answer };

  Kind kind = Kind::ask;
  std::string text;                 // full protocol text
  std::vector<std::string> tokens;  // as emitted; empty -> tokenize text on use
  std::optional<std::vector<double>> token_logprobs;  // aligned with tokens

  std::string body() const { return strip_marker(text); }
};

struct ActionOptions {
  bool force_answer = false;
  double temperature = 0.0;
};

struct OracleCaps {
  int max_in_flight = 0;  // 0 = unbounded concurrent use
  bool supports_logprobs = false;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual PolicyAction next_action(const PartialQuestion& partial,
                                   std::span<const DialogueTurn> history,
                                   const ActionOptions& options) = 0;
  // Articulated summary of the patient state after `history`; proxy for the
  // model's belief state.
  virtual std::string understanding(const PartialQuestion& partial,
                                    std::span<const DialogueTurn> history) = 0;
  virtual OracleCaps caps() const { return {}; }
};

class Patient {
 public:
  virtual ~Patient() = default;
  virtual std::string respond(const std::string& question,
                              std::span<const AtomicFact> facts) = 0;
  virtual OracleCaps caps() const { return {}; }
};

class FactChecker {
 public:
  virtual ~FactChecker() = default;
  virtual bool entails(const std::string& understanding, const AtomicFact& fact) = 0;
  virtual OracleCaps caps() const { return {}; }
};

// v(S): log-probability of the gold answer given the atomic question and the
// fact subset S. Pure in (case, subset) for a fixed model state.
class AnswerScorer {
 public:
  virtual ~AnswerScorer() = default;
  virtual double answer_logprob(const PatientCase& kase, std::span<const int> subset) = 0;
  virtual OracleCaps caps() const { return {}; }
};

// Concurrency-safe memoization of oracle results. The epoch token is bumped at
// policy-update boundaries so rewards stay model-aware instead of reading
// stale values.
class MemoCache {
 public:
  void bump_epoch() {
    std::lock_guard lock(mutex_);
    ++epoch_;
    doubles_.clear();
    bools_.clear();
  }

  std::uint64_t epoch() const {
    std::lock_guard lock(mutex_);
    return epoch_;
  }

  std::optional<double> get_double(const std::string& key) const {
    std::lock_guard lock(mutex_);
    auto it = doubles_.find(key);
    if (it == doubles_.end()) return std::nullopt;
    return it->second;
  }

  void put_double(const std::string& key, double value) {
    std::lock_guard lock(mutex_);
    doubles_.emplace(key, value);
  }

  std::optional<bool> get_bool(const std::string& key) const {
    std::lock_guard lock(mutex_);
    auto it = bools_.find(key);
    if (it == bools_.end()) return std::nullopt;
    return it->second;
  }

  void put_bool(const std::string& key, bool value) {
    std::lock_guard lock(mutex_);
    bools_.emplace(key, value);
  }

 private:
  mutable std::mutex mutex_;
  std::uint64_t epoch_ = 0;
  std::unordered_map<std::string, double> doubles_;
  std::unordered_map<std::string, bool> bools_;
};

// Memoizing decorators. Keys include the cache epoch, the case, and the full
// input content, so hits are exact.
class CachingScorer : public AnswerScorer {
 public:
  CachingScorer(std::shared_ptr<AnswerScorer> inner, std::shared_ptr<MemoCache> cache)
      : inner_(std::move(inner)), cache_(std::move(cache)) {}

  double answer_logprob(const PatientCase& kase, std::span<const int> subset) override;
  OracleCaps caps() const override { return inner_->caps(); }

 private:
  std::shared_ptr<AnswerScorer> inner_;
  std::shared_ptr<MemoCache> cache_;
};

class CachingChecker : public FactChecker {
 public:
  CachingChecker(std::shared_ptr<FactChecker> inner, std::shared_ptr<MemoCache> cache)
      : inner_(std::move(inner)), cache_(std::move(cache)) {}

  bool entails(const std::string& understanding, const AtomicFact& fact) override;
  OracleCaps caps() const override { return inner_->caps(); }

 private:
  std::shared_ptr<FactChecker> inner_;
  std::shared_ptr<MemoCache> cache_;
};

struct OracleSet {
  std::shared_ptr<Policy> policy;
  std::shared_ptr<Patient> patient;
  std::shared_ptr<FactChecker> checker;
  std::shared_ptr<AnswerScorer> scorer;
  std::shared_ptr<MemoCache> cache;
};

}  // namespace promed
