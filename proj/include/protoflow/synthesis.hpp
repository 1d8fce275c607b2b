#ifndef PROTOFLOW_SYNTHESIS_HPP
#define PROTOFLOW_SYNTHESIS_HPP

#include <cstdint>
#include <utility>

#include "protoflow/dsl_spec.hpp"
#include "protoflow/preprocess.hpp"
#include "protoflow/program.hpp"
#include "protoflow/rng.hpp"

namespace protoflow::synth {

struct SynthesisConfig {
    // indicator weights: text-span distance, structure mismatch,
    // unmapped-entity count
    double lambda_span = 1.0;
    double lambda_structure = 1.0;
    double lambda_unmapped = 1.0;
    int iteration_cap = 50;
    int restarts = 8;
    std::uint64_t seed = 0;
    double size_prior_strength = 1.0;
    text::MatchConfig match;

    void validate() const;
};

// Divergence between a program and the pseudo-labeled entity sequence:
// sum over steps of the three weighted indicators. Throws LengthMismatch
// when the program does not cover the entity sequence's steps.
double divergence(const DslProgram& program, const text::EntitySequence& entities,
                  const SynthesisConfig& cfg, const dsl::DslSpec& spec);

// Divergence contribution of a single step.
double step_divergence(const std::vector<const Instruction*>& instrs,
                       const text::StepAnalysis& step, const SynthesisConfig& cfg,
                       const dsl::DslSpec& spec);

// Expectation draw: per step, an operation sampled from its candidate
// ranking and a pattern sampled with the program-size-sensitive prior
// |p|^-strength, entities bound greedily by label-slot compatibility.
// Steps without an actionable verb become flagged no-op placeholders.
DslProgram sample_program(const text::EntitySequence& entities,
                          const dsl::DslSpec& spec, const SynthesisConfig& cfg,
                          Rng& rng);

// Greedy maximization sweep: per-entity label edits accepted only when
// they strictly decrease the divergence; repeats until a full pass
// proposes nothing. The returned pair's divergence never exceeds the
// input pair's.
std::pair<text::EntitySequence, DslProgram> refine_labels(
    DslProgram program, text::EntitySequence entities, const dsl::DslSpec& spec,
    const SynthesisConfig& cfg, Rng& rng);

struct SynthesisResult {
    DslProgram program;
    double score = 0.0;
};

// Runs cfg.restarts independent EM chains (concurrently), alternating
// sampling and label refinement until the score plateaus for two
// iterations or the cap hits; returns the lowest-scoring program (ties:
// fewer unbound optional slots, then lexicographic pattern order, then
// chain index).
SynthesisResult synthesize(const text::EntitySequence& entities,
                           const dsl::DslSpec& spec, const SynthesisConfig& cfg);

// Shared with refinement: rebinds the instructions of one step from the
// step's entities (signal-clause entities excluded).
void bind_step(std::vector<Instruction*>& instrs, const text::StepAnalysis& step,
               const dsl::DslSpec& spec);

// Number of optional pattern slots left unbound (tie-break key).
std::size_t unbound_optional_count(const DslProgram& program);

}  // namespace protoflow::synth

#endif
