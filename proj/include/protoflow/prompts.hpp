#ifndef PROTOFLOW_PROMPTS_HPP
#define PROTOFLOW_PROMPTS_HPP

#include <string>
#include <vector>

namespace protoflow::prompts {

// Raw templates with their fill slots left in place.
const std::string& ner_template();              // {label_set}, {cases}, {query}
const std::string& output_template();           // {Instruction}, {Input}
const std::string& missing_reagents_template(); // {Instruction}, {Memory}

// The fixed few-shot case block substituted into the NER prompt's
// {cases} slot.
const std::string& ner_cases();

// Candidate lists render as comma-separated quoted strings.
std::string render_candidates(const std::vector<std::string>& candidates);
std::string render_label_set(const std::vector<std::string>& labels);

std::string render_ner_prompt(const std::string& query,
                              const std::vector<std::string>& label_set);
std::string render_output_prompt(const std::string& instruction_json,
                                 const std::vector<std::string>& candidates);
std::string render_missing_reagents_prompt(
    const std::string& instruction_json,
    const std::vector<std::string>& candidates);

}  // namespace protoflow::prompts

#endif
