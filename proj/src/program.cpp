#include "protoflow/program.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <json.hpp>

#include "protoflow/errors.hpp"
#include "protoflow/util.hpp"

namespace protoflow {

using ordered_json = nlohmann::ordered_json;

std::string Predicate::render() const {
    std::string out = name + "(";
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (i) out += ", ";
        out += args[i].first + " = \"" + args[i].second + "\"";
    }
    out += ")";
    return out;
}

Value Value::str(std::string s) {
    Value v;
    v.kind = Kind::Str;
    v.text = std::move(s);
    return v;
}

Value Value::qty(Quantity q) {
    Value v;
    v.kind = Kind::Qty;
    v.quantity = std::move(q);
    return v;
}

Value Value::symbol(std::string s) {
    Value v;
    v.kind = Kind::Symbol;
    v.text = std::move(s);
    return v;
}

Value Value::pending() { return Value{}; }

Value Value::masked() {
    Value v;
    v.kind = Kind::Masked;
    return v;
}

Value Value::pred(Predicate p) {
    Value v;
    v.kind = Kind::Pred;
    v.predicate = std::move(p);
    return v;
}

Value Value::list(std::vector<std::string> xs) {
    Value v;
    v.kind = Kind::StrList;
    v.items = std::move(xs);
    return v;
}

std::string Value::render() const {
    switch (kind) {
        case Kind::Str: return "\"" + text + "\"";
        case Kind::Qty: return render_quantity(quantity);
        case Kind::Symbol: return text;
        case Kind::Pending: return "?";
        case Kind::Masked: return "<<<MASK>>>";
        case Kind::Pred: return predicate.render();
        case Kind::StrList: {
            std::string out = "[";
            for (std::size_t i = 0; i < items.size(); ++i) {
                if (i) out += ", ";
                out += "\"" + items[i] + "\"";
            }
            return out + "]";
        }
    }
    return "?";
}

std::string Value::render_bare() const {
    switch (kind) {
        case Kind::Str: return text;
        case Kind::Qty: return render_quantity(quantity);
        case Kind::Symbol: return text;
        case Kind::Pending: return "?";
        case Kind::Masked: return "<<<MASK>>>";
        case Kind::Pred: return predicate.render();
        case Kind::StrList: return util::join(items, ", ");
    }
    return "?";
}

const Value* Instruction::find(const std::string& slot) const {
    for (const auto& [n, v] : bindings)
        if (n == slot) return &v;
    return nullptr;
}

Value* Instruction::find(const std::string& slot) {
    for (auto& [n, v] : bindings)
        if (n == slot) return &v;
    return nullptr;
}

void Instruction::bind(const std::string& slot, Value v) {
    for (auto& [n, existing] : bindings) {
        if (n == slot) {
            existing = std::move(v);
            return;
        }
    }
    bindings.emplace_back(slot, std::move(v));
    sort_bindings();
}

void Instruction::unbind(const std::string& slot) {
    bindings.erase(std::remove_if(bindings.begin(), bindings.end(),
                                  [&](const auto& b) { return b.first == slot; }),
                   bindings.end());
}

void Instruction::sort_bindings() {
    auto index_of = [&](const std::string& slot) -> std::size_t {
        for (std::size_t i = 0; i < pattern.slots.size(); ++i)
            if (pattern.slots[i].first == slot) return i;
        return pattern.slots.size();
    };
    std::stable_sort(bindings.begin(), bindings.end(),
                     [&](const auto& a, const auto& b) {
                         return index_of(a.first) < index_of(b.first);
                     });
}

std::string Instruction::emit_id() const {
    const Value* v = find("emit");
    if (v && v->kind == Value::Kind::Symbol) return v->text;
    return "";
}

bool wrappers_well_nested(const std::vector<ControlWrapper>& wrappers) {
    for (const auto& w : wrappers)
        if (w.begin > w.end) return false;
    for (std::size_t i = 0; i < wrappers.size(); ++i) {
        for (std::size_t j = i + 1; j < wrappers.size(); ++j) {
            const auto& a = wrappers[i];
            const auto& b = wrappers[j];
            bool disjoint = a.end < b.begin || b.end < a.begin;
            bool a_in_b = b.begin <= a.begin && a.end <= b.end;
            bool b_in_a = a.begin <= b.begin && b.end <= a.end;
            if (!disjoint && !a_in_b && !b_in_a) return false;
        }
    }
    return true;
}

ValidationReport validate_program(const DslProgram& program,
                                  const dsl::DslSpec& spec) {
    ValidationReport report;
    std::set<std::string> emits;

    for (std::size_t i = 0; i < program.instructions.size(); ++i) {
        const Instruction& instr = program.instructions[i];
        InstructionReport ir;
        ir.index = i;
        if (instr.noop) {
            report.instructions.push_back(std::move(ir));
            continue;
        }

        const dsl::OperationSchema* op = spec.find_operation(instr.operation);
        if (!op) {
            ir.parses = false;
            ir.violations.push_back(
                {i, "", "unknown-operation",
                 "operation '" + instr.operation + "' is not in the DSL"});
            report.instructions.push_back(std::move(ir));
            report.syntax_verified = false;
            continue;
        }

        bool member = false;
        for (const auto& pat : op->patterns)
            if (pat.key() == instr.pattern.key()) member = true;
        if (!member) {
            ir.parses = false;
            ir.violations.push_back({i, "", "not-a-pattern",
                                     "slot layout is not derivable for '" +
                                         instr.operation + "'"});
        }

        for (const auto& [slot, value] : instr.bindings) {
            if (!instr.pattern.has_slot(slot)) {
                ir.parses = false;
                ir.violations.push_back({i, slot, "unknown-slot",
                                         "binding for slot '" + slot +
                                             "' outside the chosen pattern"});
                continue;
            }
            const dsl::SlotDesc* d = op->slot(slot);
            if (!d) continue;  // schema mismatch already reported via pattern
            int count = value.kind == Value::Kind::StrList
                            ? static_cast<int>(value.items.size())
                            : 1;
            if (value.is_pending() || value.is_masked()) count = d->min_arity;
            if (count < std::max(1, d->min_arity) || count > d->max_arity) {
                ir.parses = false;
                ir.violations.push_back(
                    {i, slot, "arity",
                     "slot '" + slot + "' bound with " + std::to_string(count) +
                         " values; allowed " + std::to_string(d->min_arity) + ".." +
                         std::to_string(d->max_arity)});
            }
        }

        for (const auto& [slot, required] : instr.pattern.slots) {
            if (!required) continue;
            if (!instr.find(slot)) {
                ir.parses = false;
                ir.violations.push_back({i, slot, "missing-required",
                                         "required slot '" + slot +
                                             "' has no binding"});
            }
        }

        std::string emit = instr.emit_id();
        if (!emit.empty() && !emits.insert(emit).second) {
            ir.parses = false;
            ir.violations.push_back({i, "emit", "duplicate-emit",
                                     "emit id '" + emit + "' already used"});
        }

        if (!ir.violations.empty()) report.syntax_verified = false;
        report.instructions.push_back(std::move(ir));
    }

    if (!wrappers_well_nested(program.wrappers)) {
        report.program_violations.push_back("control wrappers are not well nested");
        report.syntax_verified = false;
    }
    for (const auto& w : program.wrappers)
        if (w.end >= program.instructions.size())
            report.program_violations.push_back(
                "wrapper range exceeds program length");

    return report;
}

std::string render_listing(const DslProgram& program) {
    std::string out;
    auto wrappers_opening_at = [&](std::size_t i) {
        std::vector<const ControlWrapper*> ws;
        for (const auto& w : program.wrappers)
            if (w.begin == i) ws.push_back(&w);
        // outermost first: wider ranges open first
        std::sort(ws.begin(), ws.end(), [](const auto* a, const auto* b) {
            return a->end > b->end;
        });
        return ws;
    };
    std::size_t closing[2] = {0, 0};
    (void)closing;
    std::string indent;
    for (std::size_t i = 0; i < program.instructions.size(); ++i) {
        for (const ControlWrapper* w : wrappers_opening_at(i)) {
            out += indent + w->kind + " (signal = \"" + w->signal + "\"";
            if (!w->predicate_text.empty())
                out += ", condition = \"" + w->predicate_text + "\"";
            if (w->count) out += ", count = " + util::format_number(*w->count);
            out += ") {\n";
            indent += "  ";
        }
        const Instruction& instr = program.instructions[i];
        if (instr.noop) {
            out += indent + "noop(step = " + std::to_string(instr.step_index + 1) +
                   ");\n";
        } else {
            out += indent + instr.operation + "(";
            for (std::size_t b = 0; b < instr.bindings.size(); ++b) {
                if (b) out += ", ";
                out += instr.bindings[b].first + " = " +
                       instr.bindings[b].second.render();
            }
            out += ");\n";
        }
        std::size_t closes = 0;
        for (const auto& w : program.wrappers)
            if (w.end == i) ++closes;
        for (std::size_t c = 0; c < closes; ++c) {
            indent = indent.substr(0, indent.size() >= 2 ? indent.size() - 2 : 0);
            out += indent + "}\n";
        }
    }
    return out;
}

namespace {

ordered_json value_to_json(const Value& v) {
    ordered_json j;
    switch (v.kind) {
        case Value::Kind::Str:
            j["type"] = "str";
            j["text"] = v.text;
            break;
        case Value::Kind::Qty: {
            j["type"] = "qty";
            j["dim"] = unit_dim_name(v.quantity.dim);
            j["lo"] = v.quantity.lo;
            j["hi"] = v.quantity.hi;
            j["unit"] = v.quantity.unit;
            break;
        }
        case Value::Kind::Symbol:
            j["type"] = "symbol";
            j["text"] = v.text;
            break;
        case Value::Kind::Pending:
            j["type"] = "pending";
            break;
        case Value::Kind::Masked:
            j["type"] = "masked";
            break;
        case Value::Kind::Pred: {
            j["type"] = "pred";
            j["name"] = v.predicate.name;
            ordered_json args = ordered_json::array();
            for (const auto& [k, val] : v.predicate.args)
                args.push_back(ordered_json{{"key", k}, {"value", val}});
            j["args"] = args;
            break;
        }
        case Value::Kind::StrList:
            j["type"] = "list";
            j["items"] = v.items;
            break;
    }
    return j;
}

Value value_from_json(const ordered_json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "str") return Value::str(j.at("text").get<std::string>());
    if (type == "symbol") return Value::symbol(j.at("text").get<std::string>());
    if (type == "pending") return Value::pending();
    if (type == "masked") return Value::masked();
    if (type == "qty") {
        Quantity q;
        q.dim = unit_dim_from_name(j.at("dim").get<std::string>())
                    .value_or(UnitDim::Dimensionless);
        q.lo = j.at("lo").get<double>();
        q.hi = j.at("hi").get<double>();
        q.unit = j.at("unit").get<std::string>();
        return Value::qty(q);
    }
    if (type == "pred") {
        Predicate p;
        p.name = j.at("name").get<std::string>();
        for (const auto& a : j.at("args"))
            p.args.emplace_back(a.at("key").get<std::string>(),
                                a.at("value").get<std::string>());
        return Value::pred(p);
    }
    if (type == "list")
        return Value::list(j.at("items").get<std::vector<std::string>>());
    throw Error("unknown value type in program JSON: " + type);
}

}  // namespace

std::string program_to_json(const DslProgram& program) {
    ordered_json j;
    j["spec"] = program.spec_name;
    j["title"] = program.title;
    j["yield"] = program.yield_text;
    j["ingredients"] = program.ingredients;
    ordered_json instrs = ordered_json::array();
    for (const auto& instr : program.instructions) {
        ordered_json ji;
        ji["action"] = instr.operation;
        ji["step"] = instr.step_index;
        ji["src"] = instr.source_begin;
        ji["verb"] = instr.verb;
        ji["noop"] = instr.noop;
        ji["durative"] = instr.durative;
        ji["inserted"] = instr.inserted;
        ordered_json slots = ordered_json::array();
        for (const auto& [name, required] : instr.pattern.slots)
            slots.push_back(ordered_json{{"name", name}, {"required", required}});
        ji["pattern"] = slots;
        ordered_json bindings = ordered_json::array();
        for (const auto& [name, value] : instr.bindings) {
            ordered_json b;
            b["slot"] = name;
            b["value"] = value_to_json(value);
            bindings.push_back(b);
        }
        ji["bindings"] = bindings;
        instrs.push_back(ji);
    }
    j["instructions"] = instrs;
    ordered_json wrappers = ordered_json::array();
    for (const auto& w : program.wrappers) {
        ordered_json jw;
        jw["kind"] = w.kind;
        jw["signal"] = w.signal;
        jw["condition"] = w.predicate_text;
        jw["begin"] = w.begin;
        jw["end"] = w.end;
        if (w.count) jw["count"] = *w.count;
        wrappers.push_back(jw);
    }
    j["wrappers"] = wrappers;
    ordered_json review = ordered_json::array();
    for (const auto& r : program.review)
        review.push_back(ordered_json{
            {"step", r.step}, {"kind", r.kind}, {"detail", r.detail}});
    j["review"] = review;
    return j.dump(2) + "\n";
}

DslProgram program_from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("cannot parse program JSON: ") + e.what());
    }
    DslProgram program;
    program.spec_name = j.value("spec", "");
    program.title = j.value("title", "");
    program.yield_text = j.value("yield", "");
    program.ingredients =
        j.value("ingredients", std::vector<std::string>{});
    for (const auto& ji : j.at("instructions")) {
        Instruction instr;
        instr.operation = ji.at("action").get<std::string>();
        instr.step_index = ji.at("step").get<std::size_t>();
        instr.source_begin = ji.value("src", std::size_t{0});
        instr.verb = ji.value("verb", "");
        instr.noop = ji.value("noop", false);
        instr.durative = ji.value("durative", false);
        instr.inserted = ji.value("inserted", false);
        instr.pattern.operation = instr.operation;
        for (const auto& s : ji.at("pattern"))
            instr.pattern.slots.emplace_back(s.at("name").get<std::string>(),
                                             s.at("required").get<bool>());
        for (const auto& b : ji.at("bindings"))
            instr.bindings.emplace_back(b.at("slot").get<std::string>(),
                                        value_from_json(b.at("value")));
        program.instructions.push_back(std::move(instr));
    }
    for (const auto& jw : j.value("wrappers", ordered_json::array())) {
        ControlWrapper w;
        w.kind = jw.at("kind").get<std::string>();
        w.signal = jw.at("signal").get<std::string>();
        w.predicate_text = jw.value("condition", "");
        w.begin = jw.at("begin").get<std::size_t>();
        w.end = jw.at("end").get<std::size_t>();
        if (jw.contains("count")) w.count = jw.at("count").get<double>();
        program.wrappers.push_back(w);
    }
    for (const auto& jr : j.value("review", ordered_json::array()))
        program.review.push_back(ReviewFlag{jr.at("step").get<std::size_t>(),
                                            jr.at("kind").get<std::string>(),
                                            jr.at("detail").get<std::string>()});
    return program;
}

}  // namespace protoflow
