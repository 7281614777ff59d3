#include "promed/jsonl.hpp"

#include <fstream>

namespace promed {

using nlohmann::json;

LoadedCase case_from_json(const json& record) {
  auto kase = std::make_shared<PatientCase>();
  try {
    kase->case_id = record.at("case_id").get<std::string>();
    kase->atomic_question = record.at("question").get<std::string>();
    kase->question_type = record.value("question_type", std::string("multiple-choice"));

    int id = 0;
    for (const json& text : record.at("atomic_facts")) {
      AtomicFact fact;
      fact.id = id++;
      fact.text = text.get<std::string>();
      kase->facts.push_back(std::move(fact));
    }

    for (const auto& [letter, text] : record.at("options").items()) {
      require(letter.size() == 1, ErrorKind::invalid_case,
              "option key must be a single letter, got '" + letter + "'");
      kase->options[letter[0]] = text.get<std::string>();
    }
    kase->gold_answer = OptionSet::from_letters(record.at("answer").get<std::string>());
  } catch (const json::exception& e) {
    raise(ErrorKind::invalid_case, std::string("bad case record: ") + e.what());
  }
  kase->validate();

  LoadedCase loaded;
  loaded.kase = std::move(kase);
  if (record.contains("partial_fact_ids")) {
    loaded.partial_fact_ids = record["partial_fact_ids"].get<std::vector<int>>();
  }
  return loaded;
}

std::vector<LoadedCase> load_cases(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::config, "cannot open dataset " + path.string());

  std::vector<LoadedCase> cases;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      cases.push_back(case_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      raise(ErrorKind::invalid_case, path.string() + ":" + std::to_string(line_number) +
                                         ": invalid JSON: " + e.what());
    } catch (const Error& e) {
      raise(e.kind(),
            path.string() + ":" + std::to_string(line_number) + ": " + e.what());
    }
  }
  return cases;
}

namespace {

json coverage_to_json(const FactCoverage& coverage) {
  json bits = json::array();
  for (int i = 0; i < coverage.size(); ++i) bits.push_back(coverage.bits(i) ? 1 : 0);
  return bits;
}

FactCoverage coverage_from_json(const json& bits) {
  FactCoverage coverage = FactCoverage::zeros(static_cast<int>(bits.size()));
  for (std::size_t i = 0; i < bits.size(); ++i) {
    coverage.bits(static_cast<Eigen::Index>(i)) = bits[i].get<int>() != 0;
  }
  return coverage;
}

constexpr const char* kOriginNames[] = {"prompt", "question", "patient_response", "answer"};

TokenOrigin origin_from_name(const std::string& name) {
  for (int i = 0; i < 4; ++i) {
    if (name == kOriginNames[i]) return static_cast<TokenOrigin>(i);
  }
  raise(ErrorKind::invalid_input, "unknown token origin '" + name + "'");
}

}  // namespace

json trajectory_to_json(const Trajectory& trajectory) {
  json record;
  record["case_id"] = trajectory.partial.kase->case_id;
  record["revealed_fact_ids"] = trajectory.partial.revealed_fact_ids;

  json turns = json::array();
  for (const DialogueTurn& turn : trajectory.turns) {
    json t;
    t["question"] = turn.question_text;
    t["response"] = turn.response_text;
    t["span"] = {turn.question_span.begin, turn.question_span.end};
    if (turn.sig_score) t["sig"] = *turn.sig_score;
    if (turn.coverage_after) t["coverage_after"] = coverage_to_json(*turn.coverage_after);
    if (turn.understanding_after) t["understanding_after"] = *turn.understanding_after;
    if (turn.unscoreable) t["unscoreable"] = true;
    turns.push_back(std::move(t));
  }
  record["turns"] = std::move(turns);

  record["final_answer_text"] = trajectory.final_answer_text;
  record["answer_span"] = {trajectory.answer_span.begin, trajectory.answer_span.end};
  record["predicted"] = trajectory.predicted_options.letters();

  json tokens = json::array();
  for (const Token& token : trajectory.tokens) {
    tokens.push_back({token.text, kOriginNames[static_cast<int>(token.origin)]});
  }
  record["tokens"] = std::move(tokens);

  if (trajectory.initial_coverage) {
    record["initial_coverage"] = coverage_to_json(*trajectory.initial_coverage);
  }
  if (trajectory.initial_understanding) {
    record["initial_understanding"] = *trajectory.initial_understanding;
  }
  if (trajectory.token_logprobs) record["token_logprobs"] = *trajectory.token_logprobs;
  return record;
}

Trajectory trajectory_from_json(const json& record,
                                const std::map<std::string, CasePtr>& cases) {
  const std::string case_id = record.at("case_id").get<std::string>();
  const auto it = cases.find(case_id);
  require(it != cases.end(), ErrorKind::invalid_input,
          "transcript references unknown case " + case_id);

  Trajectory trajectory;
  trajectory.partial = make_partial_question(
      it->second, record.at("revealed_fact_ids").get<std::vector<int>>());

  for (const json& t : record.at("turns")) {
    DialogueTurn turn;
    turn.question_text = t.at("question").get<std::string>();
    turn.response_text = t.at("response").get<std::string>();
    turn.question_span = {t.at("span")[0].get<int>(), t.at("span")[1].get<int>()};
    if (t.contains("sig")) turn.sig_score = t["sig"].get<double>();
    if (t.contains("coverage_after")) turn.coverage_after = coverage_from_json(t["coverage_after"]);
    if (t.contains("understanding_after")) {
      turn.understanding_after = t["understanding_after"].get<std::string>();
    }
    turn.unscoreable = t.value("unscoreable", false);
    trajectory.turns.push_back(std::move(turn));
  }

  trajectory.final_answer_text = record.at("final_answer_text").get<std::string>();
  trajectory.answer_span = {record.at("answer_span")[0].get<int>(),
                            record.at("answer_span")[1].get<int>()};
  trajectory.predicted_options =
      OptionSet::from_letters(record.at("predicted").get<std::string>());

  for (const json& token : record.at("tokens")) {
    trajectory.tokens.push_back(
        Token{token[0].get<std::string>(), origin_from_name(token[1].get<std::string>())});
  }

  if (record.contains("initial_coverage")) {
    trajectory.initial_coverage = coverage_from_json(record["initial_coverage"]);
  }
  if (record.contains("initial_understanding")) {
    trajectory.initial_understanding = record["initial_understanding"].get<std::string>();
  }
  if (record.contains("token_logprobs")) {
    trajectory.token_logprobs = record["token_logprobs"].get<std::vector<double>>();
  }

  trajectory.validate_spans();
  return trajectory;
}

json score_to_json(const ScoreResult& score) {
  json record;
  record["R_tau"] = score.r_tau;
  record["correct"] = score.correct;
  record["sig_sum"] = score.sig_sum;
  json turns = json::array();
  for (const TurnScore& turn : score.turns) {
    json t;
    t["ig"] = turn.ig;
    t["sig"] = turn.sig;
    t["new_facts"] = turn.new_facts;
    t["lost_facts"] = turn.lost_facts;
    if (turn.unscoreable) t["unscoreable"] = true;
    turns.push_back(std::move(t));
  }
  record["turns"] = std::move(turns);
  return record;
}

void write_lines(const std::filesystem::path& path, std::span<const json> lines) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::config, "cannot write " + path.string());
  for (const json& line : lines) out << line.dump() << '\n';
}

std::vector<json> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::config, "cannot open " + path.string());
  std::vector<json> lines;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      lines.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      raise(ErrorKind::invalid_input, path.string() + ":" + std::to_string(line_number) +
                                          ": invalid JSON: " + e.what());
    }
  }
  return lines;
}

void write_json_file(const std::filesystem::path& path, const json& value) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::config, "cannot write " + path.string());
  out << value.dump(2) << '\n';
}

}  // namespace promed
