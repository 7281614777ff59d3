#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "promed/error.hpp"

namespace promed {

enum class TemplateId {
  doctor_system,
  patient,
  understanding,
  fact_checker,
  judge_patient,       // dataset construction (template shipped, pipeline not run)
  fact_decomposition,  // dataset construction (template shipped, pipeline not run)
};

struct PromptTemplate {
  TemplateId id = TemplateId::doctor_system;
  std::string body;  // text with {placeholder} slots
};

const char* template_name(TemplateId id);

// Compiled-in default bodies, mirrored by assets/prompts/<name>.txt.
PromptTemplate builtin_template(TemplateId id);

// Loads <dir>/<name>.txt; empty dir or missing file falls back to the builtin.
PromptTemplate load_template(TemplateId id, const std::filesystem::path& dir);

// Exact {name} substitution. A placeholder without a binding raises
// Error(render) naming it; extra bindings are ignored.
std::string render(const PromptTemplate& tmpl,
                   const std::map<std::string, std::string>& bindings);

}  // namespace promed
