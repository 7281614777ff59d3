#include "promed/prompts.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace promed {

namespace {

constexpr const char* kDoctorSystem = R"(You are a professional doctor with excellent reasoning and analytical skills in diagnosing medical conditions, as well as strong abilities in clinical inquiry and patient evaluation.
Your task is to answer a problem based on patient information. The information you are given may be incomplete. You should rely on your medical knowledge, the patient's current status, and the clinical question to ask follow-up questions and obtain necessary supplementary information.

Below is a {question_type} problem based on patient information:
Problem: {question}
Options: {option_str}

Please analyze the problem thoroughly using your professional medical knowledge.
During each round of dialogue, if you believe the current patient information is insufficient to determine the correct answer, you should analyze the options and ask a targeted question to gather essential information that will help you make the correct diagnosis.
If you think the available information is sufficient to answer the question, please combine all relevant medical knowledge and patient data to perform a detailed analysis and provide the correct answer.

Important instructions:
1. Each of your responses must follow one of the two formats below:
   a. If you need to ask a question, start your response with "question:" followed by the specific question you want to ask based on the options and current patient information;
   b. If you are ready to give the final answer, start with "answer:", then provide your detailed reasoning, and end with your chosen option in the format: [answer: XXX].
2. If there is uncertainty due to incomplete patient information, you must ask follow-up questions to gather more data.
3. In each round, you may only ask one question or provide the final answer.
4. You may ask up to 10 questions; after that, you must provide your final answer.
)";

constexpr const char* kPatient = R"(You are a patient undergoing a medical consultation. Your basic health condition is entirely based on the atomic facts provided below. You will interact with the doctor by answering the questions they ask, using only the information given. You must not reveal that you are a language model; instead, treat the provided information as your actual health status.

Your information is as follows:
{atomic_facts}

During your interaction with the doctor, please adhere to the following guidelines:
1. Your responses must be strictly based on the provided facts. Do not add, assume, or fabricate any information beyond what is explicitly stated.
2. If you are unable to answer a question based on the facts, respond with "I don't know" or another appropriate expression of uncertainty.
3. Do not mention or imply that your responses are drawn from predefined records or external data. Your expressions should feel natural, as if they reflect your own experiences and conditions.
4. Do not state or imply that you are simulating or playing the role of a patient. Assume the identity of someone who is genuinely experiencing these symptoms.
)";

constexpr const char* kUnderstanding = R"(You are a professional physician. Your task is to provide a comprehensive understanding and summary of the patient's current condition based on the provided patient information and doctor-patient dialogue. Your summary should reflect a clear grasp of the patient's medical history, current symptoms, relevant diagnostic information, test results, and possible diagnostic directions.

Known patient information:
{patient_information}
Doctor-patient dialogue:
{dialogue}

Based on the above information, please provide your overall understanding of the patient. You must include all explicit information and reasonable inferences based on the available data. Do not make any unfounded guesses or fabricate facts.

Your summary may include:
1. Basic patient information and medical history overview, such as age, gender, past medical history, family history, and allergy history.
2. The patient's chief complaint and current symptoms, identifying the most prominent discomforts or symptoms.
3. Summary of physical signs and test findings, describing relevant signs and abnormal test results based on the available data and dialogue.
4. Possible diagnoses, suggesting plausible diagnoses at the current stage.

Please ensure your summary is medically professional and logically coherent, and avoid omitting any important information.
)";

constexpr const char* kFactChecker = R"(Answer the question about patient information based on the given context.

Context: {context}

Input: {fact} True or False?
You should only reply True or False, no other information should be outputted.
Output:
)";

constexpr const char* kJudgePatient = R"(Please refer to the examples and determine whether the following question is based on the analysis of a patient's medical record. Only output "Yes" or "No" as the answer; do not include any additional text:

Examples:
Question: A 30-year-old male fell from the third floor and injured his left abdomen. He sustained fractures of the 6th, 7th, and 8th left ribs, splenic rupture, and intestinal rupture. Upon admission, he was tense, had a temperature of 38.5C, pale complexion, cold extremities, rapid thready pulse at 110 bpm, blood pressure 130/100 mmHg, and reduced urine output. Which of the following examinations is currently inappropriate?
Answer: Yes

Question: In a certain region, the average life expectancy of women in 2005 was 72.24 years, and in 2009 it was 75.47 years. The two years' life expectancies can be compared because the life table indicator...
Answer: No

Question: {Question}
Answer:
)";

constexpr const char* kFactDecomposition = R"(Please refer to the example and decompose the following clinical question stem into atomic facts about the patient.
Each atomic fact should be a complete sentence. You should only output the atomic facts, one sentence per line.
Do not output any extra content:

Example:
Question:
Male, 55 years old. He experienced upper abdominal discomfort and vomiting for the past 2 days. The vomitus contained sour-smelling food residue and symptoms were relieved after vomiting. Physical examination revealed visible gastric peristalsis.

Answer:
The patient is male.
The patient is 55 years old.
The patient experienced upper abdominal discomfort for the past 2 days.
The patient experienced vomiting for the past 2 days, and the vomitus contained sour-smelling food residue.
The patient's symptoms were relieved after vomiting.
Physical examination revealed visible gastric peristalsis.
Physical examination revealed visible peristaltic waves.

Question: {Question}
Answer:
)";

}  // namespace

const char* template_name(TemplateId id) {
  switch (id) {
    case TemplateId::doctor_system: return "doctor_system";
    case TemplateId::patient: return "patient";
    case TemplateId::understanding: return "understanding";
    case TemplateId::fact_checker: return "fact_checker";
    case TemplateId::judge_patient: return "judge_patient";
    case TemplateId::fact_decomposition: return "fact_decomposition";
  }
  return "unknown";
}

PromptTemplate builtin_template(TemplateId id) {
  switch (id) {
    case TemplateId::doctor_system: return {id, kDoctorSystem};
    case TemplateId::patient: return {id, kPatient};
    case TemplateId::understanding: return {id, kUnderstanding};
    case TemplateId::fact_checker: return {id, kFactChecker};
    case TemplateId::judge_patient: return {id, kJudgePatient};
    case TemplateId::fact_decomposition: return {id, kFactDecomposition};
  }
  raise(ErrorKind::invalid_input, "unknown template id");
}

PromptTemplate load_template(TemplateId id, const std::filesystem::path& dir) {
  if (dir.empty()) return builtin_template(id);
  const std::filesystem::path path = dir / (std::string(template_name(id)) + ".txt");
  std::ifstream in(path);
  if (!in) return builtin_template(id);
  std::ostringstream body;
  body << in.rdbuf();
  return {id, body.str()};
}

std::string render(const PromptTemplate& tmpl,
                   const std::map<std::string, std::string>& bindings) {
  std::string out;
  out.reserve(tmpl.body.size());

  std::size_t pos = 0;
  while (pos < tmpl.body.size()) {
    const char c = tmpl.body[pos];
    if (c != '{') {
      out.push_back(c);
      ++pos;
      continue;
    }
    std::size_t end = pos + 1;
    while (end < tmpl.body.size() &&
           (std::isalnum(static_cast<unsigned char>(tmpl.body[end])) || tmpl.body[end] == '_')) {
      ++end;
    }
    if (end < tmpl.body.size() && tmpl.body[end] == '}' && end > pos + 1) {
      const std::string name = tmpl.body.substr(pos + 1, end - pos - 1);
      const auto it = bindings.find(name);
      require(it != bindings.end(), ErrorKind::render,
              std::string("template ") + template_name(tmpl.id) +
                  ": no binding for placeholder {" + name + "}");
      out += it->second;
      pos = end + 1;
    } else {
      out.push_back(c);  // literal brace, not a placeholder
      ++pos;
    }
  }
  return out;
}

}  // namespace promed
