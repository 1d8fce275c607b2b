#ifndef PROTOFLOW_REAGENT_FLOW_HPP
#define PROTOFLOW_REAGENT_FLOW_HPP

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "protoflow/dsl_spec.hpp"
#include "protoflow/gateway.hpp"
#include "protoflow/program.hpp"

namespace protoflow::flow {

struct ReagentRecord {
    std::string id;        // symbolic id (mixture_1) or normalized raw name
    std::string surface;   // display name
    std::ptrdiff_t defined_by = -1;  // instruction index; -1 = protocol input
    bool input = false;
};

// The extended pushdown automaton: states and input alphabet are
// operation indices, the memory is a randomly accessible collection of
// reagent records, q0 is the first operation, Z the empty memory, and
// acceptance is an empty memory after terminal consumption.
struct PdaMachine {
    std::vector<ReagentRecord> memory;
    std::set<std::size_t> enabled;  // M(q): operations the machine may consume
    int fresh_counter = 0;

    bool memory_has(const std::string& id) const;
    const ReagentRecord* memory_find(const std::string& id) const;
};

struct ReagentNode {
    std::string id;
    std::string name;
    std::ptrdiff_t defined_by = -1;
    std::ptrdiff_t killed_by = -1;  // -1 while alive / dangling
    bool input = false;
    bool terminal_consumed = false;
    bool conditional_kill = false;  // killed on a may-skip branch path
};

struct ReagentFlowGraph {
    std::vector<ReagentNode> reagents;
    // R: operation pairs (definer, killer), 0-based instruction indices
    std::vector<std::pair<std::size_t, std::size_t>> dependences;
    bool accept = false;
    std::vector<std::string> dangling;
};

struct FlowAnalysis {
    ReagentFlowGraph graph;
    DslProgram program;  // targets resolved, emit identifiers assigned
};

// Out(o): the records the instruction yields. An instruction with an
// emit slot defines its bound id, or a fresh intermediate named
// mixture_<k> when the slot is pending. Raw reagent literals register as
// defined-at-source records inside transition(), on first appearance.
std::vector<ReagentRecord> defines(const Instruction& instr,
                                   const dsl::DslSpec& spec,
                                   PdaMachine& machine);

// Reagents in memory the instruction consumes. Named slots match by
// normalized surface; pending slots resolve through the gateway (target
// via the output prompt, reagent slots via the missing-reagents prompt)
// and the resolution is written back into the instruction.
std::vector<std::string> kills(PdaMachine& machine, Instruction& instr,
                               const dsl::DslSpec& spec,
                               ExtractorGateway& gateway);

// Selects exactly one candidate as the record feeding this instruction.
std::string resolve_output(const Instruction& instr,
                           const std::vector<std::string>& candidates,
                           const dsl::DslSpec& spec, ExtractorGateway& gateway);

struct TransitionResult {
    std::vector<std::string> killed;
    std::vector<std::string> defined;
    std::vector<std::string> touched;  // read or consumed record ids
    std::vector<std::string> unknown_inputs;
};

// One PDA step: erase kills, append defines, advance the enabled set.
// Throws IllegalTransition when the instruction is not enabled.
TransitionResult transition(PdaMachine& machine, Instruction& instr,
                            std::size_t index, std::size_t next_index,
                            bool conditional, const dsl::DslSpec& spec,
                            ExtractorGateway& gateway);

// Full reaching-definitions traversal in execution order. Bounded loops
// replay their range up to the declared count (capped), unbounded loops
// replay once with a flagged assumption.
FlowAnalysis analyze_flow(const DslProgram& program, const dsl::DslSpec& spec,
                          ExtractorGateway& gateway);

// Fraction of adjacent instruction pairs linked by a define-kill
// dependence; programs with fewer than two instructions return 1.0.
double locality_statistic(const ReagentFlowGraph& graph,
                          const DslProgram& program);

// C.2-style flat record: {"action": ..., "reagent": [...], ...,
// "output": ""}.
std::string instruction_record_json(const Instruction& instr,
                                    const dsl::DslSpec& spec);

}  // namespace protoflow::flow

#endif
