#ifndef PROTOFLOW_PROGRAM_HPP
#define PROTOFLOW_PROGRAM_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "protoflow/dsl_spec.hpp"
#include "protoflow/quantity.hpp"

namespace protoflow {

struct Predicate {
    std::string name;
    std::vector<std::pair<std::string, std::string>> args;

    std::string render() const;  // e.g. check_done(target = "beef")
    bool operator==(const Predicate& o) const = default;
};

// A slot binding value. Pending marks a slot the later stages must
// resolve (reagent flow or completion); Masked is the canonical
// missing-value marker for parameters nothing could ground.
struct Value {
    enum class Kind { Str, Qty, Symbol, Pending, Masked, Pred, StrList };

    Kind kind = Kind::Pending;
    std::string text;                 // Str surface or Symbol id
    Quantity quantity;                // Qty
    Predicate predicate;              // Pred
    std::vector<std::string> items;   // StrList

    static Value str(std::string s);
    static Value qty(Quantity q);
    static Value symbol(std::string s);
    static Value pending();
    static Value masked();
    static Value pred(Predicate p);
    static Value list(std::vector<std::string> xs);

    bool is_pending() const { return kind == Kind::Pending; }
    bool is_masked() const { return kind == Kind::Masked; }

    // Listing form: strings quoted, symbols bare, quantities compact.
    std::string render() const;
    // Unquoted scalar form used in canonical records.
    std::string render_bare() const;

    bool operator==(const Value& o) const = default;
};

struct ReviewFlag {
    std::size_t step = 0;
    std::string kind;    // no-action | missing-parameter | unresolved-signal | ...
    std::string detail;

    bool operator==(const ReviewFlag& o) const = default;
};

struct ControlWrapper {
    std::string kind;            // "loop" | "wait" | "branch"
    std::string signal;          // the keyword that triggered it
    std::string predicate_text;  // opaque condition text
    std::size_t begin = 0;       // inclusive instruction range
    std::size_t end = 0;
    std::optional<double> count;  // declared iteration count, if any

    bool operator==(const ControlWrapper& o) const = default;
};

struct Instruction {
    std::string operation;
    dsl::ProgramPattern pattern;
    // Kept sorted by the pattern's slot order.
    std::vector<std::pair<std::string, Value>> bindings;
    std::size_t step_index = 0;
    std::size_t source_begin = 0;  // byte offset of the verb in the protocol
    std::string verb;      // surface form that matched the operation
    bool noop = false;     // placeholder for an unmatchable step
    bool durative = false; // matched via a durative synonym
    bool inserted = false; // materialized by control-flow analysis

    const Value* find(const std::string& slot) const;
    Value* find(const std::string& slot);
    void bind(const std::string& slot, Value v);
    void unbind(const std::string& slot);
    void sort_bindings();
    std::string emit_id() const;

    bool operator==(const Instruction& o) const = default;
};

struct DslProgram {
    std::string spec_name;
    std::vector<Instruction> instructions;
    std::vector<ControlWrapper> wrappers;
    std::vector<ReviewFlag> review;

    // protocol metadata carried along the pipeline
    std::string title;
    std::string yield_text;
    std::vector<std::string> ingredients;

    bool operator==(const DslProgram& o) const = default;
};

struct SlotViolation {
    std::size_t instruction = 0;
    std::string slot;
    std::string kind;  // missing-required | unknown-slot | arity | not-a-pattern | ...
    std::string message;
};

struct InstructionReport {
    std::size_t index = 0;
    bool parses = true;
    std::vector<SlotViolation> violations;
};

struct ValidationReport {
    std::vector<InstructionReport> instructions;
    std::vector<std::string> program_violations;
    bool syntax_verified = true;
};

// Per-instruction CFG membership check: the chosen layout must be one of
// the enumerated patterns, every required slot bound, no unknown slots,
// arities within bounds, emits unique, wrappers well nested.
ValidationReport validate_program(const DslProgram& program,
                                  const dsl::DslSpec& spec);

bool wrappers_well_nested(const std::vector<ControlWrapper>& wrappers);

// Readable program listing, one `op(name = value, ...);` line per
// instruction with wrapper blocks around ranges.
std::string render_listing(const DslProgram& program);

// Deterministic JSON round-trip for stage artifacts.
std::string program_to_json(const DslProgram& program);
DslProgram program_from_json(const std::string& text);

}  // namespace protoflow

#endif
