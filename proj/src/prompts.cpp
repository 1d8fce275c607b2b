#include "protoflow/prompts.hpp"

namespace protoflow::prompts {

namespace {

std::string replace_slot(std::string text, const std::string& slot,
                         const std::string& value) {
    std::size_t pos = text.find(slot);
    while (pos != std::string::npos) {
        text.replace(pos, slot.size(), value);
        pos = text.find(slot, pos + value.size());
    }
    return text;
}

}  // namespace

const std::string& ner_template() {
    static const std::string t =
        "Given entity label set: {label_set}.\n"
        "Please name the entities in the given text. Based on the given entity "
        "label set, provide answer in the following JSON format: [{\"Entity "
        "Name\": \"Entity Label\"}]. If there is no entity in the text, return "
        "the following empty list: [].\n"
        "Please note that entities have already been annotated with [], no need "
        "to extract and analyze other entities.\n"
        "{cases}\n"
        "Text: {query}\n"
        "Answer:";
    return t;
}

const std::string& ner_cases() {
    static const std::string t =
        "Text: Dissolve [10 g] of [sodium chloride] in [100 mL] of [distilled "
        "water] at [80\xC2\xB0"
        "C].\n"
        "Answer: [{\"10 g\": \"mass\"}, {\"sodium chloride\": \"reagent\"}, "
        "{\"100 mL\": \"volume\"}, {\"distilled water\": \"reagent\"}, "
        "{\"80\xC2\xB0"
        "C\": \"temperature\"}]\n"
        "Text: Mix well.\n"
        "Answer: []";
    return t;
}

const std::string& output_template() {
    static const std::string t =
        "This instruction describes a step in an experimental process, which "
        "includes one action, multiple parameters, and one output. \n"
        "Please help analyze the output of this instruction. I will provide a "
        "list of potential outputs. You need to assist in determining which of "
        "these outputs is most suitable for this instruction. \n"
        "Note that you must choose one output from the list. Please output only "
        "a string without any explanation.\n"
        "\n"
        "[Examples]\n"
        "Instruction: {\"action\": \"add\", \"reagent\": [\"glycoblue\"], "
        "\"output\": \"\"}\n"
        "Potential output list: \"RNA\", \"mRNA\"\n"
        "Output: \"RNA\"\n"
        "\n"
        "Instruction: {\"action\": \"add\", \"concentration\": [\"1:10 volume 5 "
        "M NaCl\"], \"output\": \"\"}\n"
        "Potential output list: \"a \xCE\xBCMACS column\", \"solution\"\n"
        "Output: \"solution\"\n"
        "\n"
        "Instruction: {\"action\": \"heat\", \"reagent\": [\"limestone\"], "
        "\"output\": \"\"}\n"
        "Potential output list: \"water\", \"NaCl\"\n"
        "Output: \n"
        "\n"
        "[Question]\n"
        "Instruction: {Instruction}\n"
        "Potential output list: {Input}\n"
        "Output:";
    return t;
}

const std::string& missing_reagents_template() {
    static const std::string t =
        "This instruction describes a step in an experimental process, which "
        "includes one action, multiple parameters-including various "
        "reagents-and one output.\n"
        "Please help analyze the missing reagents of this instruction. I will "
        "provide a list of potential reagents. You need to help me analyze "
        "which of these reagents might be the ones omitted from the current "
        "instruction. \n"
        "Please note how many reagent parameters are missing from the current "
        "instruction. It is possible that some reagent parameters cannot be "
        "completed with the list provided. Please output only a comma-separated "
        "list of strings without any explanation.\n"
        "\n"
        "[Examples]\n"
        "Instruction: {\"action\": \"add\", \"reagent\": [\"\"], \"output\": "
        "\"\"}\n"
        "Potential reagent list: \"RNA\", \"glycoblue\"\n"
        "Reagents: \"glycoblue\"\n"
        "\n"
        "Instruction: {\"action\": \"add\", \"concentration\": [\"1:10 "
        "volume\"], \"reagent\": [\"\", \"\"], \"output\": \"\"}\n"
        "Potential reagent list: \"\xCE\xBCMACS\", \"solution\", \"NaCl\"\n"
        "Reagents: \"NaCl\", \"\xCE\xBCMACS\"\n"
        "\n"
        "Instruction: {\"action\": \"use\", \"reagent\": [\"BamHI\", \"XhoI\", "
        "\"\"], \"device\": [\"PCR amplification\"], \"output\": \"\"}\n"
        "Potential reagent list: \"agar\", \"food\"\n"
        "Reagents:\n"
        "\n"
        "[Question]\n"
        "Instruction: {Instruction}\n"
        "Potential reagent list: {Memory}\n"
        "Reagents:";
    return t;
}

std::string render_candidates(const std::vector<std::string>& candidates) {
    std::string out;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (i) out += ", ";
        out += "\"" + candidates[i] + "\"";
    }
    return out;
}

std::string render_label_set(const std::vector<std::string>& labels) {
    std::string out = "[";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i) out += ", ";
        out += "\"" + labels[i] + "\"";
    }
    return out + "]";
}

std::string render_ner_prompt(const std::string& query,
                              const std::vector<std::string>& label_set) {
    std::string t = ner_template();
    t = replace_slot(t, "{label_set}", render_label_set(label_set));
    t = replace_slot(t, "{cases}", ner_cases());
    t = replace_slot(t, "{query}", query);
    return t;
}

std::string render_output_prompt(const std::string& instruction_json,
                                 const std::vector<std::string>& candidates) {
    std::string t = output_template();
    t = replace_slot(t, "{Instruction}", instruction_json);
    t = replace_slot(t, "{Input}", render_candidates(candidates));
    return t;
}

std::string render_missing_reagents_prompt(
    const std::string& instruction_json,
    const std::vector<std::string>& candidates) {
    std::string t = missing_reagents_template();
    t = replace_slot(t, "{Instruction}", instruction_json);
    t = replace_slot(t, "{Memory}", render_candidates(candidates));
    return t;
}

}  // namespace protoflow::prompts
