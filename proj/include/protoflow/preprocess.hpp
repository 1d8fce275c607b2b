#ifndef PROTOFLOW_PREPROCESS_HPP
#define PROTOFLOW_PREPROCESS_HPP

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "protoflow/dsl_spec.hpp"
#include "protoflow/quantity.hpp"

namespace protoflow {
class ExtractorGateway;
}

namespace protoflow::text {

// The pseudo-label vocabulary used across extraction, binding, and the
// NER prompt's {label_set} slot.
const std::vector<std::string>& pseudo_label_set();

struct Step {
    std::size_t begin = 0;  // byte span into ProtocolText::raw
    std::size_t end = 0;
    std::string text;       // raw[begin, end)
    std::string marker;     // stripped list marker ("1.", "Step 3:"), if any
};

struct IngredientEntry {
    std::string name;       // e.g. "wine"
    std::string qualifier;  // e.g. "red"
    std::optional<Quantity> quantity;
    std::string raw;

    std::string full_name() const {
        return qualifier.empty() ? name : qualifier + " " + name;
    }
};

struct ProtocolText {
    std::string raw;
    std::string title;
    std::string yield_text;
    std::vector<IngredientEntry> ingredients;
    std::vector<Step> steps;
};

// Parses optional front matter (title / Yield: / Ingredients: list) and
// segments the instruction body. A body with two or more blank-line
// separated paragraphs keeps one step per paragraph; otherwise steps
// split on sentence terminators. Empty input yields zero steps.
ProtocolText parse_protocol(const std::string& raw);

// Re-segments text.raw in place (steps populated); front matter is
// detected by the "Instructions:" header or absent entirely.
ProtocolText segment_protocol(ProtocolText text);

struct ActionCandidate {
    std::string operation;
    double score = 0.0;
};

struct ActionMention {
    std::string verb;
    std::size_t begin = 0;  // absolute byte span of the verb token
    std::size_t end = 0;
    std::size_t sentence = 0;
    bool negated = false;
    bool deferred = false;   // guarded by a trailing "when <cond>" clause
    bool durative = false;   // matched through a durative synonym
    std::string defer_condition;
    std::vector<ActionCandidate> candidates;  // ranked, best first
};

struct Entity {
    std::string surface;
    std::size_t begin = 0;  // absolute byte span into raw; raw[span] == surface
    std::size_t end = 0;
    std::string label;
    double confidence = 1.0;
    std::optional<Quantity> quantity;
    bool from_alias = false;       // proxy name resolved via the spec alias table
    bool after_preposition = false;
    bool in_signal_clause = false;
};

struct ControlSignal {
    std::string kind;     // "loop" | "wait" | "branch"
    std::string keyword;
    std::string clause;   // condition text, articles kept
    std::size_t begin = 0;
    std::size_t end = 0;
    std::optional<double> count;
    std::string governed;  // loop: nominalized/verbal hint for the domain
};

struct StepAnalysis {
    std::size_t step_index = 0;
    std::vector<ActionMention> actions;
    std::vector<Entity> entities;
    std::vector<ControlSignal> signals;
    bool no_action = false;
};

struct EntitySequence {
    std::vector<StepAnalysis> steps;
};

struct MatchConfig {
    double w_exact = 0.7;
    double w_sem = 0.3;
    double floor = 0.35;
    // Pluggable similarity provider; defaults to character-trigram cosine.
    std::function<double(const std::string&, const std::string&)> similarity;

    double blend(double exact, double sem) const {
        return w_exact * exact + w_sem * sem;
    }
};

// Blended exact/semantic ranking of DSL operations for an action string.
// Total order; ties broken lexicographically by operation name. Entries
// below cfg.floor are dropped.
std::vector<ActionCandidate> match_operation(const std::string& action,
                                             const dsl::DslSpec& spec,
                                             const MatchConfig& cfg = {});

// Imperative-verb extraction: sentence-initial verbs (articles, adverbs
// and auxiliaries skipped), coordinated verbs after ","/";"/"and"/"then",
// and the "let it <verb>" idiom. Negated and infinitive positions are
// skipped; "when <cond>"-guarded clauses are marked deferred.
std::vector<ActionMention> extract_actions(const std::string& step_text,
                                           std::size_t step_begin,
                                           const dsl::DslSpec& spec,
                                           const MatchConfig& cfg = {});

// Rule-level entity extraction over one step: annotation markers,
// number+unit recognition, lexicon lookup (ingredients, container nouns,
// alias proxies), and quantity-noun-phrase attachment.
std::vector<Entity> extract_entities(const Step& step, const ProtocolText& protocol,
                                     const dsl::DslSpec& spec,
                                     ExtractorGateway& gateway);

// Full pre-processing: segmentation, per-step actions + entities +
// control signals, signal-clause masking.
EntitySequence analyze_protocol(const ProtocolText& protocol,
                                const dsl::DslSpec& spec,
                                ExtractorGateway& gateway,
                                const MatchConfig& cfg = {});

// Splits text into sentences (terminator-aware; decimals kept intact).
// Returns byte ranges relative to the input.
std::vector<std::pair<std::size_t, std::size_t>> split_sentences(
    const std::string& text);

}  // namespace protoflow::text

#endif
