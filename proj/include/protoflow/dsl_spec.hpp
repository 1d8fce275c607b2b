#ifndef PROTOFLOW_DSL_SPEC_HPP
#define PROTOFLOW_DSL_SPEC_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "protoflow/quantity.hpp"

namespace protoflow::dsl {

enum class SlotKind {
    Reagent,          // consumed/used material named by text
    VesselOrReagent,  // destination: either a vessel noun or a live reagent
    Quantity,         // unit-dimensioned condition value
    Predicate,        // pre/postcondition expression
    Resource,         // allocated container id; never bound from text
    Emit,             // output product identifier; assigned by flow analysis
};

enum class SvoRole { None, Object, Iobj };

struct ParamSchema {
    std::string name;
    std::string kind;  // "quantity" | "string" | "symbol" | "predicate"
    std::optional<UnitDim> unit;
    std::optional<Quantity> default_value;
    // proxy name -> grounded value or range, per the domain's conventions
    std::map<std::string, Quantity> aliases;
};

struct SlotDesc {
    std::string name;  // condition name from V_cond
    SlotKind kind = SlotKind::Reagent;
    SvoRole svo = SvoRole::None;
    int min_arity = 1;
    int max_arity = 1;
    bool required = true;
    bool consumes = false;  // reagent slots: whether use kills the reagent
    std::string parameter;  // parameter schema carrying units/aliases
    std::optional<Quantity> default_value;  // op-specific suggested value
};

// One legal slot layout of an operation: the ordered slot names the
// instruction may bind, with their required flags.
struct ProgramPattern {
    std::string operation;
    std::vector<std::pair<std::string, bool>> slots;

    bool has_slot(const std::string& name) const;
    std::size_t size() const { return slots.size(); }
    // Lexicographic sort key over slot names.
    std::string key() const;
    bool operator==(const ProgramPattern& o) const = default;
};

struct OperationSchema {
    std::string name;
    std::vector<std::string> synonyms;
    // Synonyms that mark the instruction as maintaining a condition over
    // time (e.g. "keep" for heat); used by control-flow detection.
    std::vector<std::string> durative_synonyms;
    std::vector<SlotDesc> slots;
    std::vector<ProgramPattern> patterns;  // cached o*, sorted

    const SlotDesc* slot(const std::string& name) const;
};

struct Production {
    std::string lhs;
    std::vector<std::string> rhs;      // symbol names, '?' suffix stripped
    std::vector<bool> optional;        // parallel to rhs
};

struct ControlKeyword {
    std::string keyword;
    std::string kind;  // "loop" | "wait" | "branch"
};

// Semantic restriction on operation layouts (element of T_R).
struct ProductionConstraint {
    std::string kind;  // "requires" | "excludes"
    std::string operation;
    std::string subject;
    std::vector<std::string> others;
};

struct DslSpec {
    std::string name;
    std::string start_symbol;
    // The four variable classes: "ctrl", "op", "cond", "par".
    std::map<std::string, std::vector<std::string>> variables;
    std::vector<std::string> terminals;
    std::vector<Production> productions;

    std::vector<ControlKeyword> control;
    std::vector<OperationSchema> operations;
    std::map<std::string, std::vector<std::string>> conditions;  // T_cond
    std::map<std::string, ParamSchema> parameters;               // T_par
    std::vector<ProductionConstraint> constraints;               // T_R
    std::vector<std::string> predicates;       // declared predicate names
    std::vector<std::string> container_nouns;  // vessel lexicon for NER

    const OperationSchema* find_operation(const std::string& name) const;
    bool is_variable(const std::string& symbol) const;
    bool is_terminal(const std::string& symbol) const;
    std::vector<const Production*> productions_of(const std::string& lhs) const;

    // Resolves a proxy name against every alias table; the slot's
    // parameter is consulted first when given.
    std::optional<Quantity> lookup_alias(const std::string& surface,
                                         const std::string& parameter = "") const;
};

// Loads and fully validates a spec file (JSON; see docs/formats.md).
// Throws SpecParseError on malformed input and SpecValidationError on a
// dangling symbol, unsatisfiable arity, or recursive pattern grammar.
DslSpec load_dsl_spec(const std::string& path);
DslSpec parse_dsl_spec(const std::string& text, const std::string& origin);

// Enumerates o*: every slot layout derivable from the operation's
// productions under the T_R constraints. Deterministic lexicographic
// order. The result is also cached on the schema at load time.
std::vector<ProgramPattern> enumerate_patterns(const OperationSchema& op,
                                               const DslSpec& spec);

}  // namespace protoflow::dsl

#endif
