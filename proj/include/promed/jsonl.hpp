#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>

#include "promed/core.hpp"
#include "promed/sig.hpp"

namespace promed {

struct LoadedCase {
  CasePtr kase;
  std::optional<std::vector<int>> partial_fact_ids;  // dataset-provided reveal set
};

// One case per line: {case_id, question, options: {letter: text}, answer,
// atomic_facts: [string], partial_fact_ids?: [int]}. Unknown fields ignored.
std::vector<LoadedCase> load_cases(const std::filesystem::path& path);

LoadedCase case_from_json(const nlohmann::json& record);

// Trajectory transcripts (episodes.jsonl). Cases are resolved by case_id on
// read, so transcripts can be rescored offline.
nlohmann::json trajectory_to_json(const Trajectory& trajectory);
Trajectory trajectory_from_json(const nlohmann::json& record,
                                const std::map<std::string, CasePtr>& cases);

nlohmann::json score_to_json(const ScoreResult& score);

void write_lines(const std::filesystem::path& path, std::span<const nlohmann::json> lines);
std::vector<nlohmann::json> read_lines(const std::filesystem::path& path);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& value);

}  // namespace promed
