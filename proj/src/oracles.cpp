#include "promed/oracles.hpp"

#include <sstream>

namespace promed {

namespace {

std::string scorer_key(std::uint64_t epoch, const PatientCase& kase,
                       std::span<const int> subset) {
  std::ostringstream key;
  key << "v|" << epoch << '|' << kase.case_id << '|';
  for (int id : subset) key << id << ',';
  return key.str();
}

}  // namespace

double CachingScorer::answer_logprob(const PatientCase& kase, std::span<const int> subset) {
  const std::string key = scorer_key(cache_->epoch(), kase, subset);
  if (auto hit = cache_->get_double(key)) return *hit;
  const double value = inner_->answer_logprob(kase, subset);
  cache_->put_double(key, value);
  return value;
}

bool CachingChecker::entails(const std::string& understanding, const AtomicFact& fact) {
  std::ostringstream key;
  key << "e|" << cache_->epoch() << '|' << fact.id << '\x1f' << fact.text << '\x1f'
      << understanding;
  const std::string k = key.str();
  if (auto hit = cache_->get_bool(k)) return *hit;
  const bool value = inner_->entails(understanding, fact);
  cache_->put_bool(k, value);
  return value;
}

}  // namespace promed
