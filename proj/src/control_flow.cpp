#include "protoflow/control_flow.hpp"

#include <algorithm>
#include <set>

#include "protoflow/util.hpp"

namespace protoflow::synth {

namespace {

// finds a pattern of `op` whose slot set equals `slots`
const dsl::ProgramPattern* pattern_with_slots(const dsl::OperationSchema& op,
                                              const std::set<std::string>& slots) {
    for (const auto& pat : op.patterns) {
        if (pat.slots.size() != slots.size()) continue;
        bool all = true;
        for (const auto& [name, req] : pat.slots)
            if (!slots.count(name)) all = false;
        if (all) return &pat;
    }
    return nullptr;
}

// re-selects the instruction's pattern so that `extra` becomes available;
// returns false when no enumerated layout covers it
bool upgrade_pattern(Instruction& instr, const dsl::OperationSchema& op,
                     const std::string& extra) {
    if (instr.pattern.has_slot(extra)) return true;
    std::set<std::string> want;
    for (const auto& [name, req] : instr.pattern.slots) want.insert(name);
    want.insert(extra);
    const dsl::ProgramPattern* pat = pattern_with_slots(op, want);
    if (!pat) return false;
    instr.pattern = *pat;
    instr.sort_bindings();
    return true;
}

std::vector<std::string> strip_articles(std::vector<std::string> tokens) {
    static const std::set<std::string> arts = {"the", "a", "an"};
    tokens.erase(std::remove_if(tokens.begin(), tokens.end(),
                                [&](const std::string& t) {
                                    return arts.count(util::lower(t)) > 0;
                                }),
                 tokens.end());
    return tokens;
}

}  // namespace

Predicate canonicalize_predicate(const std::string& clause) {
    auto tokens = strip_articles(util::tokenize(clause));
    // "<X ...> is|are done"
    if (tokens.size() >= 3) {
        const std::string v = util::lower(tokens[tokens.size() - 2]);
        const std::string last = util::lower(tokens.back());
        if ((v == "is" || v == "are") && (last == "done" || last == "ready" ||
                                          last == "finished" || last == "reached")) {
            std::vector<std::string> subject(tokens.begin(), tokens.end() - 2);
            if (last == "done" || last == "ready" || last == "finished") {
                Predicate p;
                p.name = "check_done";
                p.args.emplace_back("target", util::join(subject, " "));
                return p;
            }
        }
    }
    Predicate p;
    p.name = "check";
    p.args.emplace_back("condition", clause);
    return p;
}

DslProgram detect_control_flow(const text::EntitySequence& entities,
                               DslProgram program, const dsl::DslSpec& spec) {
    auto& instrs = program.instructions;

    auto last_instr_before = [&](std::size_t step_index,
                                 std::size_t offset) -> Instruction* {
        Instruction* found = nullptr;
        for (auto& instr : instrs) {
            if (instr.noop) continue;
            if (instr.step_index > step_index) break;
            if (instr.step_index == step_index && instr.source_begin >= offset)
                continue;
            found = &instr;
        }
        return found;
    };

    // 1. deferred "<verb> ... when done" clauses fold into the previous
    //    instruction's postcondition
    for (const auto& step : entities.steps) {
        for (const auto& action : step.actions) {
            if (!action.deferred || action.negated) continue;
            Instruction* host = last_instr_before(step.step_index, action.begin);
            if (!host) {
                program.review.push_back({step.step_index, "unresolved-signal",
                                          "no instruction precedes deferred '" +
                                              action.verb + "'"});
                continue;
            }
            Predicate pred;
            pred.name = util::lower(action.verb);
            // object noun phrase, when one was extracted inside the clause
            std::size_t clause_end = static_cast<std::size_t>(-1);
            for (const auto& other : step.actions)
                if (other.begin > action.begin)
                    clause_end = std::min(clause_end, other.begin);
            for (const auto& e : step.entities) {
                if (e.begin >= action.end && e.end <= clause_end &&
                    (e.label == "reagent" || e.label == "container")) {
                    pred.args.emplace_back("target", e.surface);
                    break;
                }
            }
            const dsl::OperationSchema* op = spec.find_operation(host->operation);
            if (op && upgrade_pattern(*host, *op, "postcond")) {
                host->bind("postcond", Value::pred(pred));
            } else {
                ControlWrapper w;
                w.kind = "wait";
                w.signal = "when";
                w.predicate_text = pred.render();
                std::size_t idx = host - instrs.data();
                w.begin = w.end = idx;
                program.wrappers.push_back(w);
            }
        }
    }

    // 2. leading wait/branch signals attach as preconditions
    struct PendingDurative {
        Predicate predicate;
        std::string reagent;
        std::size_t governed;
    };
    std::vector<PendingDurative> durative_candidates;

    for (const auto& step : entities.steps) {
        for (const auto& sig : step.signals) {
            if (sig.kind == "loop") continue;
            Instruction* governed = nullptr;
            for (auto& instr : instrs) {
                if (instr.noop || instr.step_index != step.step_index) continue;
                if (instr.source_begin >= sig.end) {
                    governed = &instr;
                    break;
                }
            }
            if (!governed) {
                for (auto& instr : instrs)
                    if (!instr.noop && instr.step_index == step.step_index)
                        governed = &instr;
            }
            if (!governed) {
                program.review.push_back({step.step_index, "unresolved-signal",
                                          "signal '" + sig.keyword +
                                              "' has no governed instruction"});
                continue;
            }
            Predicate pred = canonicalize_predicate(sig.clause);
            const dsl::OperationSchema* op = spec.find_operation(governed->operation);
            if (op && upgrade_pattern(*governed, *op, "precond")) {
                governed->bind("precond", Value::pred(pred));
            } else {
                ControlWrapper w;
                w.kind = sig.kind;
                w.signal = sig.keyword;
                w.predicate_text = sig.clause;
                std::size_t idx = governed - instrs.data();
                w.begin = w.end = idx;
                program.wrappers.push_back(w);
            }
            if (pred.name == "check_done" && !pred.args.empty())
                durative_candidates.push_back(
                    {pred, util::lower(pred.args.front().second),
                     static_cast<std::size_t>(governed - instrs.data())});
        }
    }

    // 3. durative re-assertion: a maintained condition (e.g. "keep on
    //    medium to high heat") stays active for a reagent added later;
    //    the completion predicate closes it, so the maintained operation
    //    re-materializes right after the reagent's introduction.
    for (const auto& cand : durative_candidates) {
        auto mentions_reagent = [&](const Instruction& instr) {
            for (const auto& [slot, v] : instr.bindings) {
                const dsl::OperationSchema* op = spec.find_operation(instr.operation);
                const dsl::SlotDesc* d = op ? op->slot(slot) : nullptr;
                if (!d || d->kind != dsl::SlotKind::Reagent) continue;
                if (v.kind == Value::Kind::Str &&
                    util::lower(v.text) == cand.reagent)
                    return true;
                if (v.kind == Value::Kind::StrList)
                    for (const auto& item : v.items)
                        if (util::lower(item) == cand.reagent) return true;
            }
            return false;
        };
        std::ptrdiff_t introducer = -1;
        for (std::size_t i = 0; i < instrs.size() && i < cand.governed; ++i)
            if (!instrs[i].noop && mentions_reagent(instrs[i]))
                introducer = static_cast<std::ptrdiff_t>(i);
        if (introducer < 0) continue;
        std::ptrdiff_t durative = -1;
        for (std::ptrdiff_t i = 0; i < introducer; ++i)
            if (instrs[i].durative) durative = i;
        if (durative < 0) continue;

        const Instruction& proto = instrs[durative];
        const dsl::OperationSchema* op = spec.find_operation(proto.operation);
        if (!op) continue;
        Instruction cont;
        cont.operation = proto.operation;
        cont.step_index = instrs[introducer].step_index;
        cont.source_begin = instrs[introducer].source_begin;
        cont.verb = proto.verb;
        cont.inserted = true;
        std::set<std::string> slots;
        for (const auto& [name, v] : proto.bindings) {
            if (name == "duration" || name == "emit") continue;
            slots.insert(name);
        }
        slots.insert("postcond");
        const dsl::ProgramPattern* pat = pattern_with_slots(*op, slots);
        if (!pat) {
            slots.erase("postcond");
            pat = pattern_with_slots(*op, slots);
        }
        if (!pat) continue;
        cont.pattern = *pat;
        for (const auto& [name, v] : proto.bindings) {
            if (!cont.pattern.has_slot(name)) continue;
            const dsl::SlotDesc* d = op->slot(name);
            // the maintained target re-resolves against the live mixture
            if (d && (d->kind == dsl::SlotKind::VesselOrReagent ||
                      d->kind == dsl::SlotKind::Reagent))
                cont.bind(name, Value::pending());
            else if (d && d->kind == dsl::SlotKind::Resource)
                cont.bind(name, Value::pending());
            else
                cont.bind(name, v);
        }
        if (cont.pattern.has_slot("postcond"))
            cont.bind("postcond", Value::pred(cand.predicate));
        for (const auto& [name, required] : cont.pattern.slots)
            if (required && !cont.find(name)) cont.bind(name, Value::pending());
        cont.sort_bindings();

        std::size_t at = static_cast<std::size_t>(introducer) + 1;
        instrs.insert(instrs.begin() + at, std::move(cont));
        program.review.push_back(
            {instrs[introducer].step_index, "inferred-continuation",
             "re-asserted maintained '" + proto.operation +
                 "' closed by completion check"});
        for (auto& w : program.wrappers) {
            if (w.begin >= at) ++w.begin;
            if (w.end >= at) ++w.end;
        }
    }

    // 4. loop signals wrap the governed instructions
    for (const auto& step : entities.steps) {
        for (const auto& sig : step.signals) {
            if (sig.kind != "loop") continue;
            // match the governed hint against operations
            std::string governed_op;
            double best_sim = 0.4;  // floor for nominalized references
            for (const auto& tok : strip_articles(util::tokenize(sig.governed))) {
                for (const auto& op : spec.operations) {
                    double s = util::trigram_cosine(tok, op.name);
                    for (const auto& syn : op.synonyms)
                        s = std::max(s, util::trigram_cosine(tok, syn));
                    if (s > best_sim) {
                        best_sim = s;
                        governed_op = op.name;
                    }
                }
            }
            std::ptrdiff_t lo = -1, hi = -1;
            if (!governed_op.empty()) {
                for (std::size_t i = 0; i < instrs.size(); ++i) {
                    if (instrs[i].step_index > step.step_index) break;
                    if (instrs[i].step_index == step.step_index &&
                        instrs[i].source_begin >= sig.begin)
                        break;
                    if (instrs[i].operation == governed_op) {
                        hi = static_cast<std::ptrdiff_t>(i);
                        lo = hi;
                        while (lo > 0 && instrs[lo - 1].operation == governed_op)
                            --lo;
                    }
                }
            }
            if (lo < 0) {
                program.review.push_back({step.step_index, "unresolved-signal",
                                          "loop signal '" + sig.keyword +
                                              "' has no resolvable domain"});
                continue;
            }
            ControlWrapper w;
            w.kind = "loop";
            w.signal = sig.keyword;
            w.predicate_text = sig.clause;
            w.count = sig.count;
            w.begin = static_cast<std::size_t>(lo);
            w.end = static_cast<std::size_t>(hi);
            program.wrappers.push_back(w);
        }
    }

    std::sort(program.wrappers.begin(), program.wrappers.end(),
              [](const ControlWrapper& a, const ControlWrapper& b) {
                  if (a.begin != b.begin) return a.begin < b.begin;
                  return a.end > b.end;
              });
    return program;
}

}  // namespace protoflow::synth
