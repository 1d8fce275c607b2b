#ifndef PROTOFLOW_CONTROL_FLOW_HPP
#define PROTOFLOW_CONTROL_FLOW_HPP

#include "protoflow/dsl_spec.hpp"
#include "protoflow/preprocess.hpp"
#include "protoflow/program.hpp"

namespace protoflow::synth {

// Attaches control structure detected from the step texts to the
// synthesized program:
//   - "<verb> ... when <cond>" clauses fold into the preceding
//     instruction's postcondition;
//   - leading wait/branch signals ("once/when/if <clause>,") bind as the
//     governed instruction's precondition (or wrap it when the operation
//     has no precondition slot);
//   - a completion predicate over a reagent maintained under an earlier
//     durative instruction re-asserts that instruction after the
//     reagent's introduction, carrying the predicate as postcondition;
//   - loop signals wrap the smallest contiguous range of instructions
//     matching the signal's governed verb.
// Signals with no resolvable domain are recorded as review flags and
// leave the program unchanged.
DslProgram detect_control_flow(const text::EntitySequence& entities,
                               DslProgram program, const dsl::DslSpec& spec);

// Canonicalizes a signal clause: "<the> X is|are done" becomes
// check_done(target = "X"); anything else becomes check(condition = ...).
Predicate canonicalize_predicate(const std::string& clause);

}  // namespace protoflow::synth

#endif
