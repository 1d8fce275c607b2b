#include "protoflow/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <set>

#include "protoflow/errors.hpp"
#include "protoflow/util.hpp"

namespace protoflow::synth {

namespace {

constexpr double kEps = 1e-12;

std::string label_for_dim(UnitDim d) {
    switch (d) {
        case UnitDim::VolumeML: return "volume";
        case UnitDim::MassG: return "mass";
        case UnitDim::TemperatureC: return "temperature";
        case UnitDim::DurationS: return "duration";
        case UnitDim::Rate: return "speed";
        case UnitDim::Count: return "count";
        case UnitDim::Dimensionless: return "count";
    }
    return "other";
}

std::optional<UnitDim> slot_unit(const dsl::SlotDesc& slot,
                                 const dsl::DslSpec& spec) {
    if (slot.parameter.empty()) return std::nullopt;
    auto it = spec.parameters.find(slot.parameter);
    if (it == spec.parameters.end()) return std::nullopt;
    return it->second.unit;
}

bool compatible(const dsl::SlotDesc& slot, const text::Entity& e,
                const dsl::DslSpec& spec) {
    switch (slot.kind) {
        case dsl::SlotKind::Reagent:
            return e.label == "reagent";
        case dsl::SlotKind::VesselOrReagent:
            return e.label == "reagent" || e.label == "container" ||
                   e.label == "device";
        case dsl::SlotKind::Quantity: {
            if (!e.quantity) return false;
            auto unit = slot_unit(slot, spec);
            return unit && *unit == e.quantity->dim;
        }
        default:
            return false;
    }
}

Value entity_value(const text::Entity& e) {
    if (e.from_alias || !e.quantity) return Value::str(e.surface);
    return Value::qty(*e.quantity);
}

// clause span of the i-th instruction of a step: from its verb to the
// next instruction's verb
std::pair<std::size_t, std::size_t> clause_of(
    const std::vector<const Instruction*>& instrs, std::size_t i) {
    std::size_t begin = instrs[i]->source_begin;
    std::size_t end = i + 1 < instrs.size()
                          ? instrs[i + 1]->source_begin
                          : static_cast<std::size_t>(-1);
    return {begin, end};
}

bool value_matches_entity(const Value& v, const text::Entity& e) {
    switch (v.kind) {
        case Value::Kind::Str:
            return v.text == e.surface;
        case Value::Kind::StrList:
            return std::find(v.items.begin(), v.items.end(), e.surface) !=
                   v.items.end();
        case Value::Kind::Qty:
            return e.quantity && render_quantity(v.quantity) ==
                                     render_quantity(*e.quantity);
        default:
            return false;
    }
}

}  // namespace

void SynthesisConfig::validate() const {
    if (lambda_span < 0 || lambda_structure < 0 || lambda_unmapped < 0)
        throw Error("synthesis indicator weights must be non-negative");
    if (lambda_span == 0 && lambda_structure == 0 && lambda_unmapped == 0)
        throw Error("at least one synthesis indicator weight must be positive");
    if (iteration_cap < 1) throw Error("iteration cap must be >= 1");
    if (restarts < 1) throw Error("restart count must be >= 1");
}

void bind_step(std::vector<Instruction*>& instrs, const text::StepAnalysis& step,
               const dsl::DslSpec& spec) {
    for (Instruction* instr : instrs) instr->bindings.clear();

    struct Usable {
        const text::Entity* entity;
        bool used = false;
    };
    std::vector<Usable> pool;
    for (const auto& e : step.entities)
        if (!e.in_signal_clause) pool.push_back({&e});

    std::vector<const Instruction*> view(instrs.begin(), instrs.end());

    // pass 1: in-clause binding, svo-preferred order
    for (std::size_t i = 0; i < instrs.size(); ++i) {
        Instruction& instr = *instrs[i];
        const dsl::OperationSchema* op = spec.find_operation(instr.operation);
        if (!op) continue;
        auto [cb, ce] = clause_of(view, i);
        for (const auto& [slot_name, required] : instr.pattern.slots) {
            const dsl::SlotDesc* slot = op->slot(slot_name);
            if (!slot) continue;
            if (slot->kind == dsl::SlotKind::Emit ||
                slot->kind == dsl::SlotKind::Resource ||
                slot->kind == dsl::SlotKind::Predicate)
                continue;

            std::vector<Usable*> candidates;
            for (auto& u : pool) {
                if (u.used) continue;
                if (u.entity->begin < cb || u.entity->begin >= ce) continue;
                if (compatible(*slot, *u.entity, spec)) candidates.push_back(&u);
            }
            std::stable_sort(candidates.begin(), candidates.end(),
                             [&](const Usable* a, const Usable* b) {
                                 auto pref = [&](const Usable* u) {
                                     if (slot->svo == dsl::SvoRole::Object)
                                         return u->entity->after_preposition ? 1 : 0;
                                     if (slot->svo == dsl::SvoRole::Iobj)
                                         return u->entity->after_preposition ? 0 : 1;
                                     return 0;
                                 };
                                 if (pref(a) != pref(b)) return pref(a) < pref(b);
                                 return a->entity->begin < b->entity->begin;
                             });
            if (candidates.empty()) continue;
            std::size_t take = std::min<std::size_t>(
                candidates.size(), static_cast<std::size_t>(slot->max_arity));
            if (take == 1) {
                instr.bind(slot_name, entity_value(*candidates[0]->entity));
                candidates[0]->used = true;
            } else {
                std::vector<const text::Entity*> chosen;
                for (std::size_t k = 0; k < take; ++k) {
                    chosen.push_back(candidates[k]->entity);
                    candidates[k]->used = true;
                }
                std::sort(chosen.begin(), chosen.end(),
                          [](const text::Entity* a, const text::Entity* b) {
                              return a->begin < b->begin;
                          });
                std::vector<std::string> items;
                for (const auto* e : chosen) items.push_back(e->surface);
                instr.bind(slot_name, Value::list(std::move(items)));
            }
        }
    }

    // pass 2: spill leftover entities into any empty compatible slot
    for (auto& u : pool) {
        if (u.used) continue;
        for (Instruction* instr : instrs) {
            const dsl::OperationSchema* op = spec.find_operation(instr->operation);
            if (!op) continue;
            bool bound = false;
            for (const auto& [slot_name, required] : instr->pattern.slots) {
                const dsl::SlotDesc* slot = op->slot(slot_name);
                if (!slot) continue;
                if (slot->kind == dsl::SlotKind::Emit ||
                    slot->kind == dsl::SlotKind::Resource ||
                    slot->kind == dsl::SlotKind::Predicate)
                    continue;
                if (instr->find(slot_name)) continue;
                if (!compatible(*slot, *u.entity, spec)) continue;
                instr->bind(slot_name, entity_value(*u.entity));
                u.used = true;
                bound = true;
                break;
            }
            if (bound) break;
        }
    }

    // pass 3: required slots that stay text-unbound become pending
    for (Instruction* instr : instrs) {
        for (const auto& [slot_name, required] : instr->pattern.slots) {
            if (!required || instr->find(slot_name)) continue;
            instr->bind(slot_name, Value::pending());
        }
        instr->sort_bindings();
    }
}

double step_divergence(const std::vector<const Instruction*>& instrs,
                       const text::StepAnalysis& step, const SynthesisConfig& cfg,
                       const dsl::DslSpec& spec) {
    double score = 0.0;

    for (std::size_t i = 0; i < instrs.size(); ++i) {
        const Instruction& instr = *instrs[i];
        if (instr.noop) continue;
        const dsl::OperationSchema* op = spec.find_operation(instr.operation);
        auto [cb, ce] = clause_of(instrs, i);

        // indicator 1: token distance between the pattern's canonical
        // rendering and the clause text
        std::vector<std::string> rendered = {util::lower(instr.operation)};
        for (const auto& [slot, v] : instr.bindings) {
            switch (v.kind) {
                case Value::Kind::Str:
                    for (const auto& t : util::word_tokens(v.text))
                        rendered.push_back(t);
                    break;
                case Value::Kind::StrList:
                    for (const auto& item : v.items)
                        for (const auto& t : util::word_tokens(item))
                            rendered.push_back(t);
                    break;
                case Value::Kind::Qty:
                    rendered.push_back(util::lower(render_quantity(v.quantity)));
                    break;
                case Value::Kind::Symbol:
                    rendered.push_back(util::lower(v.text));
                    break;
                default:
                    break;
            }
        }
        std::vector<std::string> clause_tokens = {util::lower(instr.verb)};
        for (const auto& e : step.entities) {
            if (e.begin < cb || e.begin >= ce || e.in_signal_clause) continue;
            if (e.quantity && !e.from_alias) {
                clause_tokens.push_back(util::lower(render_quantity(*e.quantity)));
            } else {
                for (const auto& t : util::word_tokens(e.surface))
                    clause_tokens.push_back(t);
            }
        }
        score += cfg.lambda_span *
                 util::normalized_edit_distance(rendered, clause_tokens);

        // indicator 2: pattern slot roles vs extracted subject-verb-object
        if (op) {
            bool needs_object = false, needs_iobj = false;
            for (const auto& [slot_name, required] : instr.pattern.slots) {
                if (!required) continue;
                const dsl::SlotDesc* slot = op->slot(slot_name);
                if (!slot) continue;
                if (slot->svo == dsl::SvoRole::Object) needs_object = true;
                if (slot->svo == dsl::SvoRole::Iobj) needs_iobj = true;
            }
            bool has_object = false, has_iobj = false;
            for (const auto& e : step.entities) {
                if (e.begin < cb || e.begin >= ce || e.in_signal_clause) continue;
                if (e.after_preposition)
                    has_iobj = true;
                else if (e.label == "reagent")
                    has_object = true;
            }
            score += cfg.lambda_structure * ((needs_object != has_object ? 1 : 0) +
                                             (needs_iobj != has_iobj ? 1 : 0));
        }
    }

    // indicator 3: entities mapped to no slot
    std::size_t unmapped = 0;
    for (const auto& e : step.entities) {
        if (e.in_signal_clause) continue;
        bool mapped = false;
        for (const Instruction* instr : instrs)
            for (const auto& [slot, v] : instr->bindings)
                if (value_matches_entity(v, e)) mapped = true;
        if (!mapped) ++unmapped;
    }
    score += cfg.lambda_unmapped * static_cast<double>(unmapped);
    return score;
}

double divergence(const DslProgram& program, const text::EntitySequence& entities,
                  const SynthesisConfig& cfg, const dsl::DslSpec& spec) {
    std::size_t program_steps = 0;
    for (const auto& instr : program.instructions)
        program_steps = std::max(program_steps, instr.step_index + 1);
    if (program_steps != entities.steps.size())
        throw LengthMismatch("program covers " + std::to_string(program_steps) +
                             " steps but the entity sequence has " +
                             std::to_string(entities.steps.size()));

    double total = 0.0;
    for (const auto& step : entities.steps) {
        std::vector<const Instruction*> instrs;
        for (const auto& instr : program.instructions)
            if (instr.step_index == step.step_index) instrs.push_back(&instr);
        total += step_divergence(instrs, step, cfg, spec);
    }
    return total;
}

namespace {

std::vector<Instruction> sample_step(const text::StepAnalysis& step,
                                     const dsl::DslSpec& spec,
                                     const SynthesisConfig& cfg, Rng& rng) {
    std::vector<Instruction> instrs;
    for (const auto& action : step.actions) {
        if (action.negated || action.deferred) continue;
        if (action.candidates.empty()) continue;
        std::vector<double> weights;
        for (const auto& c : action.candidates) weights.push_back(c.score);
        const auto& chosen = action.candidates[rng.discrete(weights)];
        const dsl::OperationSchema* op = spec.find_operation(chosen.operation);
        if (!op || op->patterns.empty()) continue;

        std::vector<double> sizes;
        for (const auto& pat : op->patterns)
            sizes.push_back(
                std::pow(static_cast<double>(std::max<std::size_t>(pat.size(), 1)),
                         -cfg.size_prior_strength));
        const auto& pattern = op->patterns[rng.discrete(sizes)];

        Instruction instr;
        instr.operation = op->name;
        instr.pattern = pattern;
        instr.step_index = step.step_index;
        instr.source_begin = action.begin;
        instr.verb = action.verb;
        instr.durative = action.durative;
        instrs.push_back(std::move(instr));
    }
    if (instrs.empty()) {
        Instruction noop;
        noop.noop = true;
        noop.step_index = step.step_index;
        instrs.push_back(std::move(noop));
        return instrs;
    }
    std::vector<Instruction*> ptrs;
    for (auto& i : instrs) ptrs.push_back(&i);
    bind_step(ptrs, step, spec);
    return instrs;
}

}  // namespace

DslProgram sample_program(const text::EntitySequence& entities,
                          const dsl::DslSpec& spec, const SynthesisConfig& cfg,
                          Rng& rng) {
    DslProgram program;
    program.spec_name = spec.name;
    for (const auto& step : entities.steps) {
        auto instrs = sample_step(step, spec, cfg, rng);
        for (auto& instr : instrs) {
            if (instr.noop)
                program.review.push_back(
                    {step.step_index, "no-action",
                     "step has no actionable instruction; needs manual review"});
            program.instructions.push_back(std::move(instr));
        }
    }
    return program;
}

namespace {

struct LabelProposal {
    std::string label;
    std::optional<Quantity> quantity;
    bool from_alias = false;
};

std::vector<LabelProposal> proposals_for(const text::Entity& e,
                                         const dsl::DslSpec& spec) {
    std::vector<LabelProposal> out;
    auto push = [&](LabelProposal p) {
        if (p.label == e.label) return;
        for (const auto& prev : out)
            if (prev.label == p.label) return;
        out.push_back(std::move(p));
    };
    if (auto q = parse_quantity(e.surface))
        push({label_for_dim(q->dim), q, false});
    for (const auto& [pname, ps] : spec.parameters) {
        auto it = ps.aliases.find(util::lower(util::trim(e.surface)));
        if (it != ps.aliases.end() && ps.unit)
            push({label_for_dim(*ps.unit), it->second, true});
    }
    for (const auto& noun : spec.container_nouns) {
        std::string low = util::lower(e.surface);
        if (low == noun || low == noun + "s")
            push({"container", std::nullopt, false});
    }
    push({"reagent", std::nullopt, false});
    return out;
}

void rebind_program_step(DslProgram& program, const text::StepAnalysis& step,
                         const dsl::DslSpec& spec) {
    std::vector<Instruction*> instrs;
    for (auto& instr : program.instructions)
        if (instr.step_index == step.step_index && !instr.noop)
            instrs.push_back(&instr);
    if (!instrs.empty()) bind_step(instrs, step, spec);
}

}  // namespace

std::pair<text::EntitySequence, DslProgram> refine_labels(
    DslProgram program, text::EntitySequence entities, const dsl::DslSpec& spec,
    const SynthesisConfig& cfg, Rng& rng) {
    (void)rng;  // sweeps are ordered; parameter kept for interface stability
    double current = divergence(program, entities, cfg, spec);

    bool improved = true;
    while (improved) {
        improved = false;
        for (auto& step : entities.steps) {
            for (std::size_t ei = 0; ei < step.entities.size(); ++ei) {
                if (step.entities[ei].in_signal_clause) continue;
                for (const auto& prop : proposals_for(step.entities[ei], spec)) {
                    text::StepAnalysis trial_step = step;
                    trial_step.entities[ei].label = prop.label;
                    if (prop.quantity)
                        trial_step.entities[ei].quantity = prop.quantity;
                    trial_step.entities[ei].from_alias = prop.from_alias;

                    DslProgram trial = program;
                    rebind_program_step(trial, trial_step, spec);

                    text::EntitySequence trial_entities = entities;
                    trial_entities.steps[step.step_index] = trial_step;
                    double score = divergence(trial, trial_entities, cfg, spec);
                    if (score < current - kEps) {
                        current = score;
                        program = std::move(trial);
                        step = std::move(trial_step);
                        improved = true;
                        break;
                    }
                }
            }
        }
    }
    return {std::move(entities), std::move(program)};
}

std::size_t unbound_optional_count(const DslProgram& program) {
    std::size_t n = 0;
    for (const auto& instr : program.instructions) {
        for (const auto& [slot, required] : instr.pattern.slots) {
            if (required) continue;
            const Value* v = instr.find(slot);
            if (!v || v->is_pending()) ++n;
        }
    }
    return n;
}

namespace {

std::string pattern_fingerprint(const DslProgram& program) {
    std::string out;
    for (const auto& instr : program.instructions) {
        out += instr.operation;
        out += '(';
        out += instr.pattern.key();
        out += ')';
    }
    return out;
}

struct ChainResult {
    DslProgram program;
    double score = 0.0;
    std::size_t unbound = 0;
    std::string fingerprint;
    int chain = 0;

    bool better_than(const ChainResult& o) const {
        if (score != o.score) return score < o.score;
        if (unbound != o.unbound) return unbound < o.unbound;
        if (fingerprint != o.fingerprint) return fingerprint < o.fingerprint;
        return chain < o.chain;
    }
};

ChainResult run_chain(const text::EntitySequence& entities,
                      const dsl::DslSpec& spec, const SynthesisConfig& cfg,
                      int chain_index) {
    Rng rng(Rng::derive(cfg.seed, static_cast<std::uint64_t>(chain_index)));
    text::EntitySequence labels = entities;

    DslProgram best = sample_program(labels, spec, cfg, rng);
    double best_score = divergence(best, labels, cfg, spec);

    double last_score = best_score;
    int plateau = 0;
    for (int iter = 0; iter < cfg.iteration_cap && plateau < 2; ++iter) {
        // Expectation: fresh per-step draws, accepted per step (the
        // divergence decomposes over steps).
        for (const auto& step : labels.steps) {
            auto fresh = sample_step(step, spec, cfg, rng);
            std::vector<const Instruction*> old_view, new_view;
            for (const auto& instr : best.instructions)
                if (instr.step_index == step.step_index) old_view.push_back(&instr);
            for (const auto& instr : fresh) new_view.push_back(&instr);

            double old_div = step_divergence(old_view, step, cfg, spec);
            double new_div = step_divergence(new_view, step, cfg, spec);
            auto count_unbound = [](const std::vector<const Instruction*>& v) {
                std::size_t n = 0;
                for (const auto* instr : v)
                    for (const auto& [slot, required] : instr->pattern.slots)
                        if (!required) {
                            const Value* val = instr->find(slot);
                            if (!val || val->is_pending()) ++n;
                        }
                return n;
            };
            bool accept = new_div < old_div - kEps;
            if (!accept && std::abs(new_div - old_div) <= kEps) {
                std::size_t old_unbound = count_unbound(old_view);
                std::size_t new_unbound = count_unbound(new_view);
                if (new_unbound < old_unbound) {
                    accept = true;
                } else if (new_unbound == old_unbound) {
                    auto fp = [](const std::vector<const Instruction*>& v) {
                        std::string s;
                        for (const auto* i : v) s += i->pattern.key() + "|";
                        return s;
                    };
                    accept = fp(new_view) < fp(old_view);
                }
            }
            if (accept) {
                best.instructions.erase(
                    std::remove_if(best.instructions.begin(),
                                   best.instructions.end(),
                                   [&](const Instruction& in) {
                                       return in.step_index == step.step_index;
                                   }),
                    best.instructions.end());
                std::size_t at = 0;
                while (at < best.instructions.size() &&
                       best.instructions[at].step_index < step.step_index)
                    ++at;
                best.instructions.insert(best.instructions.begin() + at,
                                         fresh.begin(), fresh.end());
            }
        }

        // Maximization: greedy label edits
        auto refined = refine_labels(std::move(best), std::move(labels), spec,
                                     cfg, rng);
        labels = std::move(refined.first);
        best = std::move(refined.second);

        best_score = divergence(best, labels, cfg, spec);
        if (std::abs(best_score - last_score) <= kEps)
            ++plateau;
        else
            plateau = 0;
        last_score = best_score;
    }

    ChainResult result;
    result.score = best_score;
    result.unbound = unbound_optional_count(best);
    result.fingerprint = pattern_fingerprint(best);
    result.program = std::move(best);
    result.chain = chain_index;
    return result;
}

}  // namespace

SynthesisResult synthesize(const text::EntitySequence& entities,
                           const dsl::DslSpec& spec, const SynthesisConfig& cfg) {
    cfg.validate();
    if (entities.steps.empty()) {
        DslProgram empty;
        empty.spec_name = spec.name;
        return {std::move(empty), 0.0};
    }

    std::vector<std::future<ChainResult>> futures;
    for (int c = 1; c < cfg.restarts; ++c)
        futures.push_back(std::async(std::launch::async, run_chain,
                                     std::cref(entities), std::cref(spec),
                                     std::cref(cfg), c));
    ChainResult winner = run_chain(entities, spec, cfg, 0);
    for (auto& f : futures) {
        ChainResult r = f.get();
        if (r.better_than(winner)) winner = std::move(r);
    }
    return {std::move(winner.program), winner.score};
}

}  // namespace protoflow::synth
