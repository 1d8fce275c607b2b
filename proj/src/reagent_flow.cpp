#include "protoflow/reagent_flow.hpp"

#include <algorithm>
#include <map>

#include <json.hpp>

#include "protoflow/errors.hpp"
#include "protoflow/util.hpp"

namespace protoflow::flow {

namespace {

constexpr std::size_t kLoopUnrollCap = 8;

std::string normalize_name(const std::string& s) {
    auto toks = util::word_tokens(s);
    toks.erase(std::remove_if(toks.begin(), toks.end(),
                              [](const std::string& t) {
                                  return t == "the" || t == "a" || t == "an";
                              }),
               toks.end());
    return util::join(toks, " ");
}

bool is_vessel_noun(const std::string& s, const dsl::DslSpec& spec) {
    auto toks = util::word_tokens(s);
    for (const auto& t : toks)
        for (const auto& noun : spec.container_nouns)
            if (t == noun || t == noun + "s") return true;
    return false;
}

// word-level overlap between a name and a memory record
std::size_t name_overlap(const std::string& a, const std::string& b) {
    auto ta = util::word_tokens(a);
    auto tb = util::word_tokens(b);
    std::size_t n = 0;
    for (const auto& x : ta) {
        for (const auto& y : tb) {
            if (x == y || x + "s" == y || y + "s" == x ||
                (x.size() > 3 && y.find(x) != std::string::npos) ||
                (y.size() > 3 && x.find(y) != std::string::npos)) {
                ++n;
                break;
            }
        }
    }
    return n;
}

}  // namespace

bool PdaMachine::memory_has(const std::string& id) const {
    return memory_find(id) != nullptr;
}

const ReagentRecord* PdaMachine::memory_find(const std::string& id) const {
    for (const auto& r : memory)
        if (r.id == id) return &r;
    return nullptr;
}

std::string instruction_record_json(const Instruction& instr,
                                    const dsl::DslSpec& spec) {
    nlohmann::ordered_json j;
    j["action"] = instr.operation;
    const dsl::OperationSchema* op = spec.find_operation(instr.operation);

    nlohmann::ordered_json reagents = nlohmann::ordered_json::array();
    for (const auto& [slot, v] : instr.bindings) {
        const dsl::SlotDesc* d = op ? op->slot(slot) : nullptr;
        if (d && d->kind == dsl::SlotKind::Reagent) {
            if (v.kind == Value::Kind::StrList)
                for (const auto& item : v.items) reagents.push_back(item);
            else if (v.kind == Value::Kind::Str || v.kind == Value::Kind::Symbol)
                reagents.push_back(v.text);
            else
                reagents.push_back("");
        }
    }
    if (!reagents.empty()) j["reagent"] = reagents;

    for (const auto& [slot, v] : instr.bindings) {
        const dsl::SlotDesc* d = op ? op->slot(slot) : nullptr;
        if (!d) continue;
        if (d->kind == dsl::SlotKind::Reagent || d->kind == dsl::SlotKind::Emit ||
            d->kind == dsl::SlotKind::Resource)
            continue;
        if (v.is_pending()) {
            j[slot] = nlohmann::ordered_json::array({""});
        } else if (d->kind == dsl::SlotKind::VesselOrReagent) {
            j[slot] = nlohmann::ordered_json::array({v.render_bare()});
        } else {
            j[slot] = nlohmann::ordered_json::array({v.render_bare()});
        }
    }
    j["output"] = instr.emit_id();
    return j.dump();
}

std::vector<ReagentRecord> defines(const Instruction& instr,
                                   const dsl::DslSpec& spec,
                                   PdaMachine& machine) {
    std::vector<ReagentRecord> out;
    const dsl::OperationSchema* op = spec.find_operation(instr.operation);
    if (!op) return out;
    for (const auto& [slot, v] : instr.bindings) {
        const dsl::SlotDesc* d = op->slot(slot);
        if (!d || d->kind != dsl::SlotKind::Emit) continue;
        std::string id;
        if (v.kind == Value::Kind::Symbol && !v.text.empty()) {
            id = v.text;
        } else {
            id = "mixture_" + std::to_string(++machine.fresh_counter);
        }
        out.push_back(ReagentRecord{id, id, -1, false});
    }
    return out;
}

std::string resolve_output(const Instruction& instr,
                           const std::vector<std::string>& candidates,
                           const dsl::DslSpec& spec, ExtractorGateway& gateway) {
    if (candidates.empty())
        throw ExtractionUnavailable("resolve_output with no candidates");
    if (candidates.size() == 1) return candidates[0];
    return gateway.query_output(instruction_record_json(instr, spec), candidates);
}

std::vector<std::string> kills(PdaMachine& machine, Instruction& instr,
                               const dsl::DslSpec& spec,
                               ExtractorGateway& gateway) {
    std::vector<std::string> killed;
    const dsl::OperationSchema* op = spec.find_operation(instr.operation);
    if (!op) return killed;

    auto consume = [&](const std::string& id, bool consumes) {
        if (consumes &&
            std::find(killed.begin(), killed.end(), id) == killed.end())
            killed.push_back(id);
    };

    // most-recent-first candidate list for anaphora resolution
    std::vector<std::string> candidates;
    for (auto it = machine.memory.rbegin(); it != machine.memory.rend(); ++it)
        candidates.push_back(it->surface);

    for (auto& [slot, v] : instr.bindings) {
        const dsl::SlotDesc* d = op->slot(slot);
        if (!d) continue;
        const bool reagent_like = d->kind == dsl::SlotKind::Reagent ||
                                  d->kind == dsl::SlotKind::VesselOrReagent;
        if (!reagent_like) continue;

        if (v.kind == Value::Kind::Symbol) {
            if (machine.memory_has(v.text)) consume(v.text, d->consumes);
            continue;
        }
        if (v.kind == Value::Kind::Str || v.kind == Value::Kind::StrList) {
            std::vector<std::string> names = v.kind == Value::Kind::Str
                                                 ? std::vector<std::string>{v.text}
                                                 : v.items;
            for (const auto& name : names) {
                // symbolic ids survive serialization as plain strings
                if (machine.memory_has(name)) {
                    consume(name, d->consumes);
                    continue;
                }
                const std::string norm = normalize_name(name);
                const ReagentRecord* best = nullptr;
                std::size_t best_overlap = 0;
                for (auto it = machine.memory.rbegin(); it != machine.memory.rend();
                     ++it) {
                    std::size_t ov = std::max(name_overlap(norm, it->surface),
                                              name_overlap(norm, it->id));
                    if (ov > best_overlap) {
                        best_overlap = ov;
                        best = &*it;
                    }
                }
                if (best) consume(best->id, d->consumes);
                // otherwise a raw literal; registration happens in transition
            }
            continue;
        }
        if (v.is_pending() && !machine.memory.empty()) {
            if (d->kind == dsl::SlotKind::VesselOrReagent) {
                std::string chosen = resolve_output(instr, candidates, spec, gateway);
                for (const auto& r : machine.memory) {
                    if (r.surface == chosen || r.id == chosen) {
                        v = Value::symbol(r.id);
                        consume(r.id, d->consumes);
                        break;
                    }
                }
            } else {
                auto names = gateway.query_missing_reagents(
                    instruction_record_json(instr, spec), candidates);
                std::vector<std::string> resolved;
                for (const auto& chosen : names) {
                    for (const auto& r : machine.memory) {
                        if (r.surface == chosen || r.id == chosen) {
                            resolved.push_back(r.id);
                            consume(r.id, d->consumes);
                            break;
                        }
                    }
                }
                if (resolved.size() == 1)
                    v = Value::symbol(resolved[0]);
                else if (resolved.size() > 1)
                    v = Value::list(resolved);
            }
        }
    }
    return killed;
}

TransitionResult transition(PdaMachine& machine, Instruction& instr,
                            std::size_t index, std::size_t next_index,
                            bool conditional, const dsl::DslSpec& spec,
                            ExtractorGateway& gateway) {
    if (!machine.enabled.count(index))
        throw IllegalTransition(index, "instruction " + std::to_string(index) +
                                           " is not enabled");
    TransitionResult result;
    const dsl::OperationSchema* op = spec.find_operation(instr.operation);

    // register raw reagent literals as defined-at-source on first appearance
    if (op) {
        for (const auto& [slot, v] : instr.bindings) {
            const dsl::SlotDesc* d = op->slot(slot);
            if (!d) continue;
            const bool reagent_like = d->kind == dsl::SlotKind::Reagent ||
                                      d->kind == dsl::SlotKind::VesselOrReagent;
            if (!reagent_like) continue;
            std::vector<std::string> names;
            if (v.kind == Value::Kind::Str) names.push_back(v.text);
            if (v.kind == Value::Kind::StrList) names = v.items;
            for (const auto& name : names) {
                if (machine.memory_has(name)) continue;
                const std::string norm = normalize_name(name);
                if (norm.empty()) continue;
                if (is_vessel_noun(name, spec)) continue;
                bool matches_memory = false;
                for (const auto& r : machine.memory)
                    if (name_overlap(norm, r.surface) > 0 ||
                        name_overlap(norm, r.id) > 0)
                        matches_memory = true;
                if (matches_memory) continue;
                machine.memory.push_back(ReagentRecord{norm, name, -1, true});
            }
        }
        // unknown symbolic references are flagged, not fatal
        for (const auto& [slot, v] : instr.bindings) {
            const dsl::SlotDesc* d = op->slot(slot);
            if (!d) continue;
            if (v.kind == Value::Kind::Symbol && !machine.memory_has(v.text))
                result.unknown_inputs.push_back(v.text);
        }
    }

    result.killed = kills(machine, instr, spec, gateway);

    // reads: referenced records that stay alive
    if (op) {
        for (const auto& [slot, v] : instr.bindings) {
            if (v.kind == Value::Kind::Symbol && machine.memory_has(v.text))
                result.touched.push_back(v.text);
        }
        for (const auto& k : result.killed) result.touched.push_back(k);
    }

    machine.memory.erase(
        std::remove_if(machine.memory.begin(), machine.memory.end(),
                       [&](const ReagentRecord& r) {
                           return std::find(result.killed.begin(),
                                            result.killed.end(),
                                            r.id) != result.killed.end();
                       }),
        machine.memory.end());

    auto defined = defines(instr, spec, machine);
    for (auto& record : defined) {
        record.defined_by = static_cast<std::ptrdiff_t>(index);
        // write the generated emit id back into the instruction
        Value* emit = instr.find("emit");
        if (emit && emit->is_pending()) *emit = Value::symbol(record.id);
        result.defined.push_back(record.id);
        machine.memory.push_back(record);
    }

    machine.enabled.erase(index);
    if (next_index != static_cast<std::size_t>(-1))
        machine.enabled.insert(next_index);
    return result;
}

FlowAnalysis analyze_flow(const DslProgram& input, const dsl::DslSpec& spec,
                          ExtractorGateway& gateway) {
    FlowAnalysis analysis;
    analysis.program = input;
    DslProgram& program = analysis.program;
    ReagentFlowGraph& graph = analysis.graph;

    // execution order with loop ranges replayed
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < program.instructions.size(); ++i) {
        order.push_back(i);
        for (const auto& w : program.wrappers) {
            if (w.kind != "loop" || w.end != i) continue;
            std::size_t repeats;
            if (w.count) {
                repeats = static_cast<std::size_t>(*w.count);
                repeats = repeats > 0 ? repeats - 1 : 0;  // first pass done
                repeats = std::min(repeats, kLoopUnrollCap - 1);
            } else {
                repeats = 0;  // unbounded: single symbolic pass
                program.review.push_back(
                    {program.instructions[w.begin].step_index, "unbounded-loop",
                     "loop traversed once symbolically"});
            }
            for (std::size_t r = 0; r < repeats; ++r)
                for (std::size_t j = w.begin; j <= w.end; ++j) order.push_back(j);
        }
    }

    auto conditional_at = [&](std::size_t idx) {
        for (const auto& w : program.wrappers)
            if (w.kind == "branch" && idx >= w.begin && idx <= w.end) return true;
        return false;
    };

    PdaMachine machine;
    std::map<std::string, ReagentNode> nodes;  // id -> lifecycle
    std::size_t last_executed = static_cast<std::size_t>(-1);

    std::size_t pos = 0;
    // skip leading noops when seeding q0
    while (pos < order.size() && program.instructions[order[pos]].noop) ++pos;
    if (pos < order.size()) machine.enabled.insert(order[pos]);

    for (; pos < order.size(); ++pos) {
        std::size_t idx = order[pos];
        Instruction& instr = program.instructions[idx];
        if (instr.noop) continue;
        std::size_t next = static_cast<std::size_t>(-1);
        for (std::size_t q = pos + 1; q < order.size(); ++q) {
            if (!program.instructions[order[q]].noop) {
                next = order[q];
                break;
            }
        }
        bool conditional = conditional_at(idx);

        // iteration replays define fresh intermediates
        bool replay = std::count(order.begin(), order.begin() + pos, idx) > 0;
        Instruction* exec_instr = &instr;
        Instruction copy;
        if (replay) {
            copy = instr;
            Value* emit = copy.find("emit");
            if (emit) *emit = Value::pending();
            exec_instr = &copy;
        }

        auto result =
            transition(machine, *exec_instr, idx, next, conditional, spec, gateway);

        for (const auto& missing : result.unknown_inputs)
            program.review.push_back({instr.step_index, "unknown-input",
                                      "reference to undefined reagent '" +
                                          missing + "'"});

        for (const auto& id : result.defined) {
            ReagentNode node;
            node.id = id;
            node.name = id;
            node.defined_by = static_cast<std::ptrdiff_t>(idx);
            nodes[id] = node;
        }
        // raw inputs registered inside transition
        for (const auto& r : machine.memory) {
            if (r.input && !nodes.count(r.id)) {
                ReagentNode node;
                node.id = r.id;
                node.name = r.surface;
                node.defined_by = -1;
                node.input = true;
                nodes[r.id] = node;
            }
        }
        for (const auto& id : result.killed) {
            if (!nodes.count(id)) {
                // consumed at the same instruction it was registered
                ReagentNode node;
                node.id = id;
                node.name = id;
                node.defined_by = -1;
                node.input = true;
                nodes[id] = node;
            }
            ReagentNode& node = nodes[id];
            if (node.killed_by < 0) {
                node.killed_by = static_cast<std::ptrdiff_t>(idx);
                node.conditional_kill = conditional;
                if (node.defined_by >= 0)
                    graph.dependences.emplace_back(
                        static_cast<std::size_t>(node.defined_by), idx);
            }
        }
        last_executed = idx;
    }

    // terminal consumption: reagents still alive that are the declared
    // product, or failing a declaration, the final instruction's own
    // emits/reads
    std::vector<std::string> blessed;
    if (!program.yield_text.empty()) {
        for (const auto& r : machine.memory) {
            if (name_overlap(normalize_name(program.yield_text), r.surface) > 0 ||
                name_overlap(normalize_name(program.yield_text), r.id) > 0)
                blessed.push_back(r.id);
        }
    }
    if (blessed.empty() && last_executed != static_cast<std::size_t>(-1)) {
        const Instruction& last = program.instructions[last_executed];
        for (const auto& [slot, v] : last.bindings) {
            if (v.kind == Value::Kind::Symbol) {
                for (const auto& r : machine.memory)
                    if (r.id == v.text) blessed.push_back(r.id);
            } else if (v.kind == Value::Kind::Str) {
                for (const auto& r : machine.memory)
                    if (r.surface == v.text || r.id == normalize_name(v.text))
                        blessed.push_back(r.id);
            }
        }
    }
    for (const auto& id : blessed) {
        auto it = nodes.find(id);
        if (it == nodes.end()) continue;
        it->second.terminal_consumed = true;
        it->second.killed_by = static_cast<std::ptrdiff_t>(last_executed);
        if (it->second.defined_by >= 0 &&
            static_cast<std::size_t>(it->second.defined_by) != last_executed)
            graph.dependences.emplace_back(
                static_cast<std::size_t>(it->second.defined_by), last_executed);
        machine.memory.erase(
            std::remove_if(machine.memory.begin(), machine.memory.end(),
                           [&](const ReagentRecord& r) { return r.id == id; }),
            machine.memory.end());
    }

    graph.accept = machine.memory.empty();
    for (const auto& r : machine.memory) graph.dangling.push_back(r.id);

    for (auto& [id, node] : nodes) graph.reagents.push_back(node);
    std::sort(graph.reagents.begin(), graph.reagents.end(),
              [](const ReagentNode& a, const ReagentNode& b) {
                  if (a.defined_by != b.defined_by) return a.defined_by < b.defined_by;
                  return a.id < b.id;
              });
    std::sort(graph.dependences.begin(), graph.dependences.end());
    graph.dependences.erase(
        std::unique(graph.dependences.begin(), graph.dependences.end()),
        graph.dependences.end());
    return analysis;
}

double locality_statistic(const ReagentFlowGraph& graph,
                          const DslProgram& program) {
    std::vector<std::size_t> real;
    for (std::size_t i = 0; i < program.instructions.size(); ++i)
        if (!program.instructions[i].noop) real.push_back(i);
    if (real.size() < 2) return 1.0;
    std::size_t linked = 0;
    for (std::size_t k = 0; k + 1 < real.size(); ++k) {
        bool hit = false;
        for (const auto& [d, kk] : graph.dependences)
            if (d == real[k] && kk == real[k + 1]) hit = true;
        if (hit) ++linked;
    }
    return static_cast<double>(linked) / static_cast<double>(real.size() - 1);
}

}  // namespace protoflow::flow
