#include "promed/core.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "promed/rng.hpp"

namespace promed {

namespace {

bool is_valid_option_letter(char c) { return c >= 'A' && c <= 'Z'; }

std::string to_upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

// Case-insensitive search for `needle` in `hay`, returning the last match.
std::size_t rfind_ci(const std::string& hay, std::string_view needle) {
  if (needle.empty() || hay.size() < needle.size()) return std::string::npos;
  const std::string h = to_upper(hay);
  const std::string n = to_upper(needle);
  return h.rfind(n);
}

}  // namespace

OptionSet OptionSet::from_letters(std::string_view letters) {
  OptionSet set;
  std::string buf;
  for (char c : letters) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',') continue;
    require(is_valid_option_letter(c), ErrorKind::invalid_input,
            std::string("option letters must be single uppercase characters, got '") + c + "'");
    buf.push_back(c);
  }
  std::sort(buf.begin(), buf.end());
  buf.erase(std::unique(buf.begin(), buf.end()), buf.end());
  set.letters_ = std::move(buf);
  return set;
}

OptionSet PatientCase::valid_letters() const {
  std::string buf;
  for (const auto& [letter, _] : options) buf.push_back(letter);
  return OptionSet::from_letters(buf);
}

void PatientCase::validate() const {
  require(!facts.empty(), ErrorKind::invalid_case, "case " + case_id + ": empty fact list");
  for (std::size_t i = 0; i < facts.size(); ++i) {
    require(facts[i].id == static_cast<int>(i), ErrorKind::invalid_case,
            "case " + case_id + ": fact ids must be contiguous from 0");
    require(!facts[i].text.empty(), ErrorKind::invalid_case,
            "case " + case_id + ": fact " + std::to_string(i) + " has empty text");
  }
  require(!options.empty(), ErrorKind::invalid_case, "case " + case_id + ": no options");
  for (const auto& [letter, _] : options) {
    require(is_valid_option_letter(letter), ErrorKind::invalid_case,
            "case " + case_id + ": option letters must be uppercase");
  }
  require(!gold_answer.empty(), ErrorKind::invalid_case, "case " + case_id + ": empty gold answer");
  for (char c : gold_answer.letters()) {
    require(options.count(c) > 0, ErrorKind::invalid_case,
            "case " + case_id + ": gold letter '" + std::string(1, c) + "' not among options");
  }
}

namespace {

std::string render_partial(const PatientCase& kase, std::span<const int> ids) {
  std::ostringstream out;
  for (int id : ids) out << kase.facts[static_cast<std::size_t>(id)].text << ' ';
  out << kase.atomic_question;
  return out.str();
}

}  // namespace

PartialQuestion make_partial_question(CasePtr kase, std::vector<int> revealed_ids) {
  require(kase != nullptr, ErrorKind::invalid_input, "null case");
  std::sort(revealed_ids.begin(), revealed_ids.end());
  revealed_ids.erase(std::unique(revealed_ids.begin(), revealed_ids.end()), revealed_ids.end());
  for (int id : revealed_ids) {
    require(id >= 0 && id < kase->fact_count(), ErrorKind::invalid_input,
            "revealed fact id " + std::to_string(id) + " outside case " + kase->case_id);
  }
  PartialQuestion partial;
  partial.rendered_text = render_partial(*kase, revealed_ids);
  partial.kase = std::move(kase);
  partial.revealed_fact_ids = std::move(revealed_ids);
  return partial;
}

PartialQuestion build_partial_question(CasePtr kase, PartialStrategy strategy,
                                       std::uint64_t seed) {
  require(kase != nullptr, ErrorKind::invalid_input, "null case");
  require(!kase->facts.empty(), ErrorKind::invalid_case,
          "case " + kase->case_id + ": empty fact list");
  std::vector<int> ids;
  switch (strategy) {
    case PartialStrategy::first_fact:
      ids = {0};
      break;
    case PartialStrategy::random_half: {
      const int n = kase->fact_count();
      require(n >= 2, ErrorKind::invalid_input,
              "random-half needs at least 2 facts, case " + kase->case_id);
      Rng rng(seed);
      ids = rng.sample_without_replacement(n, n / 2);
      break;
    }
  }
  return make_partial_question(std::move(kase), std::move(ids));
}

FactCoverage FactCoverage::from_ids(int n, std::span<const int> ids) {
  FactCoverage c = zeros(n);
  for (int id : ids) {
    require(id >= 0 && id < n, ErrorKind::invalid_input,
            "fact id " + std::to_string(id) + " out of range");
    c.bits(id) = true;
  }
  return c;
}

IntArray coverage_delta(const FactCoverage& prev, const FactCoverage& curr) {
  require(prev.size() == curr.size(), ErrorKind::invariant_violation,
          "coverage length mismatch: " + std::to_string(prev.size()) + " vs " +
              std::to_string(curr.size()));
  return curr.bits.cast<int>() - prev.bits.cast<int>();
}

OptionSet extract_options(const std::string& answer_text, const OptionSet& valid_letters) {
  require(!valid_letters.empty(), ErrorKind::invalid_input, "valid letter set is empty");

  // Trailing marker of the form "[answer: XXX]".
  const std::size_t pos = rfind_ci(answer_text, "[answer:");
  if (pos != std::string::npos) {
    const std::size_t body = pos + 8;
    const std::size_t close = answer_text.find(']', body);
    if (close != std::string::npos) {
      std::string picked;
      for (char raw : answer_text.substr(body, close - body)) {
        const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
        if (valid_letters.contains(c)) picked.push_back(c);
      }
      if (!picked.empty()) return OptionSet::from_letters(picked);
    }
  }

  // Fallback: last contiguous run of valid uppercase letters.
  std::string run, last;
  for (char c : answer_text) {
    if (valid_letters.contains(c)) {
      run.push_back(c);
    } else {
      if (!run.empty()) last = run;
      run.clear();
    }
  }
  if (!run.empty()) last = run;
  if (last.empty()) return OptionSet();
  return OptionSet::from_letters(last);
}

bool exact_match(const OptionSet& predicted, const OptionSet& gold) {
  require(!gold.empty(), ErrorKind::invalid_input, "gold answer must be non-empty");
  return predicted == gold;
}

std::vector<std::string> whitespace_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::string normalize_question(const std::string& text) {
  std::string out;
  bool pending_space = false;
  for (char raw : text) {
    const unsigned char c = static_cast<unsigned char>(raw);
    if (std::isalnum(c)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      pending_space = true;
    }
  }
  return out;
}

std::string strip_marker(const std::string& text) {
  std::size_t start = 0;
  while (start < text.size() && std::isspace(static_cast<unsigned char>(text[start]))) ++start;
  for (std::string_view marker : {kAskMarker, kAnswerMarker}) {
    if (text.size() - start >= marker.size()) {
      bool match = true;
      for (std::size_t i = 0; i < marker.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(text[start + i])) != marker[i]) {
          match = false;
          break;
        }
      }
      if (match) {
        std::size_t body = start + marker.size();
        while (body < text.size() && std::isspace(static_cast<unsigned char>(text[body]))) ++body;
        return text.substr(body);
      }
    }
  }
  return text.substr(start);
}

std::vector<bool> Trajectory::supervision_mask() const {
  std::vector<bool> mask(tokens.size(), false);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    mask[i] = tokens[i].origin == TokenOrigin::question || tokens[i].origin == TokenOrigin::answer;
  }
  return mask;
}

void Trajectory::validate_spans() const {
  const int n = static_cast<int>(tokens.size());
  std::vector<int> owner(static_cast<std::size_t>(n), -1);

  auto claim = [&](const TokenSpan& span, TokenOrigin origin, int tag) {
    require(!span.empty(), ErrorKind::invariant_violation, "empty token span");
    require(span.begin >= 0 && span.end <= n, ErrorKind::invariant_violation,
            "token span out of range");
    for (int i = span.begin; i < span.end; ++i) {
      require(owner[static_cast<std::size_t>(i)] == -1, ErrorKind::invariant_violation,
              "overlapping token spans at index " + std::to_string(i));
      require(tokens[static_cast<std::size_t>(i)].origin == origin,
              ErrorKind::invariant_violation,
              "token origin mismatch inside span at index " + std::to_string(i));
      owner[static_cast<std::size_t>(i)] = tag;
    }
  };

  int tag = 0;
  for (const DialogueTurn& turn : turns) claim(turn.question_span, TokenOrigin::question, tag++);
  claim(answer_span, TokenOrigin::answer, tag++);

  for (int i = 0; i < n; ++i) {
    const TokenOrigin origin = tokens[static_cast<std::size_t>(i)].origin;
    const bool generated =
        origin == TokenOrigin::question || origin == TokenOrigin::answer;
    require(generated == (owner[static_cast<std::size_t>(i)] != -1),
            ErrorKind::invariant_violation,
            "token " + std::to_string(i) + " not partitioned by spans");
  }

  if (token_logprobs) {
    require(static_cast<int>(token_logprobs->size()) == n, ErrorKind::invariant_violation,
            "token_logprobs length mismatch");
  }
}

}  // namespace promed
