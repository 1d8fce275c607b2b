#include "protoflow/dsl_spec.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "protoflow/errors.hpp"
#include "protoflow/util.hpp"

namespace protoflow::dsl {

using nlohmann::json;

bool ProgramPattern::has_slot(const std::string& name) const {
    for (const auto& [n, r] : slots)
        if (n == name) return true;
    return false;
}

std::string ProgramPattern::key() const {
    std::string k;
    for (const auto& [n, r] : slots) {
        k += n;
        k += '\x01';
    }
    return k;
}

const SlotDesc* OperationSchema::slot(const std::string& name) const {
    for (const auto& s : slots)
        if (s.name == name) return &s;
    return nullptr;
}

const OperationSchema* DslSpec::find_operation(const std::string& name) const {
    for (const auto& op : operations)
        if (op.name == name) return &op;
    return nullptr;
}

bool DslSpec::is_variable(const std::string& symbol) const {
    for (const auto& [cls, names] : variables)
        if (std::find(names.begin(), names.end(), symbol) != names.end())
            return true;
    return false;
}

bool DslSpec::is_terminal(const std::string& symbol) const {
    return std::find(terminals.begin(), terminals.end(), symbol) != terminals.end();
}

std::vector<const Production*> DslSpec::productions_of(const std::string& lhs) const {
    std::vector<const Production*> out;
    for (const auto& p : productions)
        if (p.lhs == lhs) out.push_back(&p);
    return out;
}

std::optional<Quantity> DslSpec::lookup_alias(const std::string& surface,
                                              const std::string& parameter) const {
    const std::string key = util::lower(util::trim(surface));
    if (!parameter.empty()) {
        auto it = parameters.find(parameter);
        if (it != parameters.end()) {
            auto a = it->second.aliases.find(key);
            if (a != it->second.aliases.end()) return a->second;
        }
        return std::nullopt;
    }
    for (const auto& [name, schema] : parameters) {
        auto a = schema.aliases.find(key);
        if (a != schema.aliases.end()) return a->second;
    }
    return std::nullopt;
}

namespace {

constexpr std::size_t kPatternCap = 4096;  // 2^12 optional combinations

Quantity parse_alias_value(const json& v, const std::string& context) {
    Quantity q;
    if (v.contains("value")) {
        q.lo = q.hi = v.at("value").get<double>();
    } else if (v.contains("lo") && v.contains("hi")) {
        q.lo = v.at("lo").get<double>();
        q.hi = v.at("hi").get<double>();
    } else {
        throw SpecParseError("alias value for " + context +
                             " needs either value or lo/hi");
    }
    std::string scale = v.value("scale", "");
    q.unit = scale;
    if (scale == "F" || scale == "C")
        q.dim = UnitDim::TemperatureC;
    else if (scale == "mL" || scale == "L" || scale == "cup" || scale == "floz")
        q.dim = UnitDim::VolumeML;
    else if (scale == "g" || scale == "kg" || scale == "ounce")
        q.dim = UnitDim::MassG;
    else if (scale == "s" || scale == "mins" || scale == "h")
        q.dim = UnitDim::DurationS;
    else if (scale == "mL/s" || scale == "mL/min" || scale == "rpm")
        q.dim = UnitDim::Rate;
    else
        q.dim = UnitDim::Dimensionless;
    return q;
}

SlotKind parse_slot_kind(const std::string& s, const std::string& context) {
    if (s == "reagent") return SlotKind::Reagent;
    if (s == "vessel_or_reagent") return SlotKind::VesselOrReagent;
    if (s == "quantity") return SlotKind::Quantity;
    if (s == "predicate") return SlotKind::Predicate;
    if (s == "resource") return SlotKind::Resource;
    if (s == "emit") return SlotKind::Emit;
    throw SpecParseError("unknown slot kind '" + s + "' in " + context);
}

SvoRole parse_svo(const std::string& s) {
    if (s == "object") return SvoRole::Object;
    if (s == "iobj") return SvoRole::Iobj;
    return SvoRole::None;
}

// Expands one production's optional markers into concrete layouts,
// appending to `out` (capped).
void expand_production(const Production& p, const OperationSchema& op,
                       std::vector<ProgramPattern>& out) {
    std::vector<std::size_t> optional_idx;
    for (std::size_t i = 0; i < p.rhs.size(); ++i)
        if (p.optional[i]) optional_idx.push_back(i);
    if (optional_idx.size() > 12)
        throw SpecValidationError(
            op.name, "operation '" + op.name + "' exceeds the optional-slot cap (" +
                         std::to_string(optional_idx.size()) + " > 12)");
    const std::size_t combos = std::size_t{1} << optional_idx.size();
    for (std::size_t mask = 0; mask < combos; ++mask) {
        ProgramPattern pat;
        pat.operation = op.name;
        for (std::size_t i = 0; i < p.rhs.size(); ++i) {
            bool include = true;
            if (p.optional[i]) {
                std::size_t bit =
                    std::find(optional_idx.begin(), optional_idx.end(), i) -
                    optional_idx.begin();
                include = (mask >> bit) & 1u;
            }
            if (include) pat.slots.emplace_back(p.rhs[i], !p.optional[i]);
        }
        out.push_back(std::move(pat));
        if (out.size() > kPatternCap)
            throw SpecValidationError(
                op.name, "pattern space of '" + op.name + "' exceeds " +
                             std::to_string(kPatternCap) + " layouts");
    }
}

bool satisfies_constraints(const ProgramPattern& pat,
                           const std::vector<ProductionConstraint>& constraints) {
    for (const auto& c : constraints) {
        if (!c.operation.empty() && c.operation != pat.operation) continue;
        if (c.kind == "requires") {
            if (pat.has_slot(c.subject))
                for (const auto& o : c.others)
                    if (!pat.has_slot(o)) return false;
        } else if (c.kind == "excludes") {
            if (pat.has_slot(c.subject))
                for (const auto& o : c.others)
                    if (pat.has_slot(o)) return false;
        }
    }
    return true;
}

void check_non_recursive(const DslSpec& spec, const std::string& root) {
    // DFS from the operation variable; revisiting any symbol on the
    // current path means the per-operation pattern grammar recurses.
    std::vector<std::string> path;
    std::set<std::string> on_path;
    auto dfs = [&](auto&& self, const std::string& sym) -> void {
        if (on_path.count(sym))
            throw SpecValidationError(
                sym, "recursive pattern grammar through symbol '" + sym + "'");
        if (spec.is_terminal(sym)) return;
        on_path.insert(sym);
        for (const Production* p : spec.productions_of(sym))
            for (const auto& r : p->rhs) self(self, r);
        on_path.erase(sym);
    };
    dfs(dfs, root);
}

}  // namespace

std::vector<ProgramPattern> enumerate_patterns(const OperationSchema& op,
                                               const DslSpec& spec) {
    std::vector<ProgramPattern> raw;
    for (const Production* p : spec.productions_of(op.name))
        expand_production(*p, op, raw);

    std::vector<ProgramPattern> out;
    std::set<std::string> seen;
    for (auto& pat : raw) {
        if (!satisfies_constraints(pat, spec.constraints)) continue;
        if (seen.insert(pat.key()).second) out.push_back(std::move(pat));
    }
    std::sort(out.begin(), out.end(),
              [](const ProgramPattern& a, const ProgramPattern& b) {
                  return a.key() < b.key();
              });
    return out;
}

DslSpec parse_dsl_spec(const std::string& text, const std::string& origin) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw SpecParseError("cannot parse spec " + origin + ": " + e.what());
    }

    DslSpec spec;
    try {
        spec.name = doc.value("name", origin);
        spec.start_symbol = doc.at("start_symbol").get<std::string>();
        for (const auto& cls : {"ctrl", "op", "cond", "par"}) {
            std::vector<std::string> names;
            if (doc.at("variables").contains(cls))
                names = doc.at("variables").at(cls).get<std::vector<std::string>>();
            spec.variables[cls] = std::move(names);
        }
        spec.terminals = doc.at("terminals").get<std::vector<std::string>>();

        for (const auto& p : doc.at("productions")) {
            Production prod;
            prod.lhs = p.at("lhs").get<std::string>();
            for (const auto& sym : p.at("rhs")) {
                std::string s = sym.get<std::string>();
                bool opt = !s.empty() && s.back() == '?';
                if (opt) s.pop_back();
                prod.rhs.push_back(s);
                prod.optional.push_back(opt);
            }
            spec.productions.push_back(std::move(prod));
        }

        const json& sem = doc.at("semantics");
        for (const auto& c : sem.value("control", json::array()))
            spec.control.push_back(
                {c.at("keyword").get<std::string>(), c.at("kind").get<std::string>()});

        for (const auto& [pname, pdef] : sem.value("parameters", json::object()).items()) {
            ParamSchema ps;
            ps.name = pname;
            ps.kind = pdef.value("kind", "string");
            if (pdef.contains("unit")) {
                auto u = unit_dim_from_name(pdef.at("unit").get<std::string>());
                if (!u)
                    throw SpecParseError("unknown unit dimension '" +
                                         pdef.at("unit").get<std::string>() +
                                         "' on parameter " + pname);
                ps.unit = *u;
            }
            if (pdef.contains("default"))
                ps.default_value = parse_alias_value(pdef.at("default"), pname);
            for (const auto& [alias, v] : pdef.value("aliases", json::object()).items())
                ps.aliases[util::lower(alias)] = parse_alias_value(v, pname);
            spec.parameters[pname] = std::move(ps);
        }

        for (const auto& [cname, params] : sem.value("conditions", json::object()).items())
            spec.conditions[cname] = params.get<std::vector<std::string>>();

        for (const auto& o : sem.at("operations")) {
            OperationSchema op;
            op.name = o.at("name").get<std::string>();
            op.synonyms = o.value("synonyms", std::vector<std::string>{});
            op.durative_synonyms =
                o.value("durative_synonyms", std::vector<std::string>{});
            for (const auto& s : o.at("slots")) {
                SlotDesc d;
                d.name = s.at("name").get<std::string>();
                d.kind = parse_slot_kind(s.value("kind", "reagent"),
                                         op.name + "." + d.name);
                d.svo = parse_svo(s.value("svo", ""));
                if (s.contains("arity")) {
                    d.min_arity = s.at("arity").at(0).get<int>();
                    d.max_arity = s.at("arity").at(1).get<int>();
                }
                d.required = s.value("required", true);
                d.consumes = s.value("consumes", false);
                d.parameter = s.value("parameter", "");
                if (s.contains("default"))
                    d.default_value =
                        parse_alias_value(s.at("default"), op.name + "." + d.name);
                op.slots.push_back(std::move(d));
            }
            spec.operations.push_back(std::move(op));
        }

        for (const auto& c : sem.value("production_constraints", json::array())) {
            ProductionConstraint pc;
            pc.kind = c.at("kind").get<std::string>();
            pc.operation = c.value("operation", "");
            pc.subject = c.at("if").get<std::string>();
            pc.others = c.at("then").get<std::vector<std::string>>();
            spec.constraints.push_back(std::move(pc));
        }

        spec.predicates = sem.value("predicates", std::vector<std::string>{});
        spec.container_nouns =
            sem.value("container_nouns", std::vector<std::string>{});
    } catch (const json::exception& e) {
        throw SpecParseError("malformed spec " + origin + ": " + e.what());
    }

    // --- validation ---

    if (!spec.is_variable(spec.start_symbol))
        throw SpecValidationError(spec.start_symbol,
                                  "start symbol '" + spec.start_symbol +
                                      "' is not a declared variable");

    for (const auto& p : spec.productions) {
        if (!spec.is_variable(p.lhs))
            throw SpecValidationError(
                p.lhs, "production head '" + p.lhs + "' is not a declared variable");
        for (const auto& r : p.rhs)
            if (!spec.is_variable(r) && !spec.is_terminal(r))
                throw SpecValidationError(
                    r, "symbol '" + r + "' in production of '" + p.lhs +
                           "' is neither a variable nor a terminal");
    }

    const auto& op_vars = spec.variables.at("op");
    const auto& cond_vars = spec.variables.at("cond");
    for (const auto& op : spec.operations) {
        if (std::find(op_vars.begin(), op_vars.end(), op.name) == op_vars.end())
            throw SpecValidationError(
                op.name, "operation '" + op.name + "' missing from variables.op");
        for (const auto& s : op.slots) {
            if (std::find(cond_vars.begin(), cond_vars.end(), s.name) ==
                cond_vars.end())
                throw SpecValidationError(
                    s.name, "slot '" + s.name + "' of operation '" + op.name +
                                "' names no condition in variables.cond");
            if (!spec.conditions.count(s.name))
                throw SpecValidationError(
                    s.name, "condition '" + s.name + "' has no semantics entry");
            if (s.min_arity > s.max_arity || s.min_arity < 0)
                throw SpecValidationError(
                    s.name, "slot '" + op.name + "." + s.name +
                                "' has unsatisfiable arity bounds");
            if (!s.parameter.empty() && !spec.parameters.count(s.parameter))
                throw SpecValidationError(
                    s.parameter, "slot '" + op.name + "." + s.name +
                                     "' references unknown parameter '" +
                                     s.parameter + "'");
        }
        if (spec.productions_of(op.name).empty())
            throw SpecValidationError(
                op.name, "operation '" + op.name + "' has no production");
    }

    for (const auto& [cname, params] : spec.conditions)
        for (const auto& p : params)
            if (!spec.parameters.count(p))
                throw SpecValidationError(
                    p, "condition '" + cname + "' names undeclared parameter '" +
                           p + "'");

    for (const auto& op_name : op_vars) {
        if (!spec.find_operation(op_name))
            throw SpecValidationError(
                op_name, "variables.op lists '" + op_name +
                             "' but semantics declares no such operation");
        check_non_recursive(spec, op_name);
    }

    // production symbols of an operation must be declared slots, and
    // required slots must appear in every layout
    for (auto& op : spec.operations) {
        for (const Production* p : spec.productions_of(op.name)) {
            for (std::size_t i = 0; i < p->rhs.size(); ++i) {
                const SlotDesc* d = op.slot(p->rhs[i]);
                if (!d)
                    throw SpecValidationError(
                        p->rhs[i], "production of '" + op.name +
                                       "' mentions undeclared slot '" + p->rhs[i] +
                                       "'");
            }
            for (const auto& s : op.slots) {
                if (!s.required) continue;
                bool found = false;
                for (std::size_t i = 0; i < p->rhs.size(); ++i)
                    if (p->rhs[i] == s.name && !p->optional[i]) found = true;
                if (!found)
                    throw SpecValidationError(
                        s.name, "required slot '" + op.name + "." + s.name +
                                    "' is missing (or optional) in a production");
            }
        }
        op.patterns = enumerate_patterns(op, spec);
        if (op.patterns.empty())
            throw SpecValidationError(
                op.name, "operation '" + op.name + "' enumerates no patterns");
    }

    return spec;
}

DslSpec load_dsl_spec(const std::string& path) {
    std::string text;
    try {
        text = util::read_file(path);
    } catch (const std::exception& e) {
        throw SpecParseError(e.what());
    }
    return parse_dsl_spec(text, path);
}

}  // namespace protoflow::dsl
