#include "protoflow/preprocess.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "protoflow/gateway.hpp"
#include "protoflow/util.hpp"

namespace protoflow::text {

const std::vector<std::string>& pseudo_label_set() {
    static const std::vector<std::string> labels = {
        "reagent", "device",   "container",     "volume", "mass", "temperature",
        "duration", "concentration", "speed", "count",  "other"};
    return labels;
}

namespace {

struct Token {
    std::string text;
    std::size_t begin = 0;
    std::size_t end = 0;
    std::string lower() const { return util::lower(text); }
};

bool is_word_char(unsigned char c) {
    return std::isalnum(c) || c == '-' || c == '\'' || c == '_' || c == '/';
}

std::vector<Token> tokenize_with_spans(const std::string& s, std::size_t offset) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        if (!is_word_char(static_cast<unsigned char>(s[i]))) {
            ++i;
            continue;
        }
        std::size_t b = i;
        while (i < s.size() && is_word_char(static_cast<unsigned char>(s[i]))) ++i;
        out.push_back({s.substr(b, i - b), offset + b, offset + i});
    }
    return out;
}

bool gap_contains(const std::string& raw, std::size_t from, std::size_t to,
                  char c) {
    for (std::size_t i = from; i < to && i < raw.size(); ++i)
        if (raw[i] == c) return true;
    return false;
}

const std::set<std::string>& articles() {
    static const std::set<std::string> s = {"the", "a", "an"};
    return s;
}

const std::set<std::string>& skip_words() {
    static const std::set<std::string> s = {"the", "a",  "an",   "do",   "does",
                                            "don't", "not", "never", "please",
                                            "carefully", "gently"};
    return s;
}

const std::set<std::string>& prepositions() {
    static const std::set<std::string> s = {"to", "in", "into", "onto", "on",
                                            "at", "with", "from", "of", "for",
                                            "as", "until", "by", "over"};
    return s;
}

const std::set<std::string>& np_stopwords() {
    static const std::set<std::string> s = {
        "more",  "well",  "also", "again", "then", "and", "or", "but",
        "when",  "while", "it",   "them",  "this", "that", "each", "all",
        "done",  "least"};
    return s;
}

bool negated_at(const std::vector<Token>& toks, std::size_t idx) {
    static const std::set<std::string> neg = {"don't", "not", "never", "no",
                                              "without", "dont", "cannot"};
    std::size_t back = idx >= 3 ? idx - 3 : 0;
    for (std::size_t j = back; j < idx; ++j)
        if (neg.count(toks[j].lower())) return true;
    return false;
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> split_sentences(
    const std::string& text) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::size_t start = 0;
    auto flush = [&](std::size_t end) {
        std::size_t b = start, e = end;
        while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
        if (e > b) out.emplace_back(b, e);
        start = end;
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c != '.' && c != '!' && c != '?') continue;
        bool at_end = i + 1 >= text.size();
        char next = at_end ? '\0' : text[i + 1];
        if (!at_end && !std::isspace(static_cast<unsigned char>(next))) continue;
        // decimals like "2.5" never reach here (next char is a digit)
        flush(i + 1);
    }
    flush(text.size());
    return out;
}

ProtocolText parse_protocol(const std::string& raw) {
    ProtocolText p;
    p.raw = raw;
    return segment_protocol(std::move(p));
}

namespace {

std::optional<Quantity> parse_ingredient_quantity(const std::string& head) {
    // head like "8 [ounces]" or "1 - 1 1/2 [ounce]" or "150 [gram]"
    std::string flat = head;
    for (char& c : flat)
        if (c == '[' || c == ']') c = ' ';
    return parse_quantity(util::trim(flat));
}

void parse_ingredient_line(const std::string& line, ProtocolText& p) {
    IngredientEntry entry;
    entry.raw = util::trim(line);
    std::string body = entry.raw;
    if (util::starts_with(body, "-")) body = util::trim(body.substr(1));

    std::size_t brace = body.find('{');
    std::size_t brace_end = body.find('}', brace == std::string::npos ? 0 : brace);
    if (brace != std::string::npos && brace_end != std::string::npos) {
        entry.name = body.substr(brace + 1, brace_end - brace - 1);
        std::string head = body.substr(0, brace);
        // trailing preparation note after ';' belongs to neither field
        std::size_t unit_end = head.rfind(']');
        std::string qty_part =
            unit_end == std::string::npos ? head : head.substr(0, unit_end + 1);
        std::string qualifier =
            unit_end == std::string::npos ? "" : head.substr(unit_end + 1);
        entry.quantity = parse_ingredient_quantity(qty_part);
        entry.qualifier = util::trim(qualifier);
    } else {
        auto toks = util::tokenize(body);
        std::size_t i = 0;
        std::string qty_text;
        while (i < toks.size() &&
               (std::isdigit(static_cast<unsigned char>(toks[i][0])) ||
                toks[i] == "-")) {
            if (!qty_text.empty()) qty_text += " ";
            qty_text += toks[i];
            ++i;
        }
        if (i < toks.size()) {
            auto q = parse_quantity(qty_text + " " + toks[i]);
            if (q) {
                entry.quantity = q;
                ++i;
            } else {
                entry.quantity = parse_quantity(qty_text);
            }
        }
        std::vector<std::string> rest(toks.begin() + i, toks.end());
        entry.name = util::join(rest, " ");
    }
    if (!entry.name.empty()) p.ingredients.push_back(std::move(entry));
}

}  // namespace

ProtocolText segment_protocol(ProtocolText text) {
    text.steps.clear();
    text.ingredients.clear();
    text.title.clear();
    text.yield_text.clear();
    const std::string& raw = text.raw;

    // Locate the front-matter boundary.
    std::size_t body_begin = 0;
    std::size_t instr_pos = raw.find("Instructions:");
    if (instr_pos != std::string::npos) {
        std::size_t line_end = raw.find('\n', instr_pos);
        body_begin = line_end == std::string::npos ? raw.size() : line_end + 1;

        // front matter: title, Yield:, Ingredients: entries
        std::size_t pos = 0;
        bool in_ingredients = false;
        while (pos < instr_pos) {
            std::size_t eol = raw.find('\n', pos);
            if (eol == std::string::npos || eol > instr_pos) eol = instr_pos;
            std::string line = util::trim(raw.substr(pos, eol - pos));
            pos = eol + 1;
            if (line.empty()) continue;
            if (util::starts_with(line, "Yield:")) {
                text.yield_text = util::trim(line.substr(6));
            } else if (util::starts_with(line, "Ingredients:")) {
                in_ingredients = true;
            } else if (in_ingredients || util::starts_with(line, "-")) {
                parse_ingredient_line(line, text);
            } else if (text.title.empty()) {
                text.title = line;
            }
        }
    }

    // Segment the body: paragraphs when there are at least two, else
    // sentences.
    std::vector<std::pair<std::size_t, std::size_t>> paragraphs;
    {
        std::size_t pos = body_begin;
        std::size_t para_start = std::string::npos;
        while (pos <= raw.size()) {
            std::size_t eol = raw.find('\n', pos);
            if (eol == std::string::npos) eol = raw.size();
            std::string line = raw.substr(pos, eol - pos);
            bool blank = util::trim(line).empty();
            if (!blank && para_start == std::string::npos) para_start = pos;
            if (blank && para_start != std::string::npos) {
                paragraphs.emplace_back(para_start, pos);
                para_start = std::string::npos;
            }
            if (eol == raw.size()) break;
            pos = eol + 1;
        }
        if (para_start != std::string::npos)
            paragraphs.emplace_back(para_start, raw.size());
    }

    auto add_step = [&](std::size_t b, std::size_t e) {
        while (b < e && std::isspace(static_cast<unsigned char>(raw[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(raw[e - 1]))) --e;
        if (b >= e) return;
        Step s;
        // strip numbered-list markers: "1.", "2)", "Step 3:"
        std::size_t m = b;
        std::size_t digits = m;
        if (raw.compare(m, 5, "Step ") == 0) {
            std::size_t d = m + 5;
            while (d < e && std::isdigit(static_cast<unsigned char>(raw[d]))) ++d;
            if (d < e && raw[d] == ':') {
                s.marker = raw.substr(m, d + 1 - m);
                m = d + 1;
            }
        } else {
            while (digits < e && std::isdigit(static_cast<unsigned char>(raw[digits])))
                ++digits;
            if (digits > m && digits < e && (raw[digits] == '.' || raw[digits] == ')') &&
                digits + 1 < e && raw[digits + 1] == ' ') {
                s.marker = raw.substr(m, digits + 1 - m);
                m = digits + 1;
            }
        }
        while (m < e && std::isspace(static_cast<unsigned char>(raw[m]))) ++m;
        s.begin = m;
        s.end = e;
        s.text = raw.substr(m, e - m);
        text.steps.push_back(std::move(s));
    };

    if (paragraphs.size() >= 2) {
        for (auto [b, e] : paragraphs) add_step(b, e);
    } else if (paragraphs.size() == 1) {
        auto [b, e] = paragraphs[0];
        std::string body = raw.substr(b, e - b);
        for (auto [sb, se] : split_sentences(body)) add_step(b + sb, b + se);
    }
    return text;
}

std::vector<ActionCandidate> match_operation(const std::string& action,
                                             const dsl::DslSpec& spec,
                                             const MatchConfig& cfg) {
    auto sim = cfg.similarity
                   ? cfg.similarity
                   : [](const std::string& a, const std::string& b) {
                         return util::trigram_cosine(a, b);
                     };
    const std::string norm = util::lower(util::trim(action));
    std::vector<ActionCandidate> out;
    for (const auto& op : spec.operations) {
        double exact = norm == op.name ? 1.0 : 0.0;
        double sem = sim(norm, op.name);
        for (const auto& syn : op.synonyms) {
            if (norm == util::lower(syn)) exact = 1.0;
            sem = std::max(sem, sim(norm, syn));
        }
        for (const auto& syn : op.durative_synonyms) {
            if (norm == util::lower(syn)) exact = 1.0;
            sem = std::max(sem, sim(norm, syn));
        }
        double score = cfg.blend(exact, sem);
        if (score >= cfg.floor) out.push_back({op.name, score});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.operation < b.operation;
    });
    return out;
}

std::vector<ActionMention> extract_actions(const std::string& step_text,
                                           std::size_t step_begin,
                                           const dsl::DslSpec& spec,
                                           const MatchConfig& cfg) {
    std::vector<ActionMention> out;
    auto sentences = split_sentences(step_text);
    for (std::size_t si = 0; si < sentences.size(); ++si) {
        auto [sb, se] = sentences[si];
        const std::string sent = step_text.substr(sb, se - sb);
        auto toks = tokenize_with_spans(sent, step_begin + sb);
        if (toks.empty()) continue;

        // leading control keyword disables the sentence-initial rule
        bool leading_signal = false;
        for (const auto& kw : spec.control) {
            auto kwtoks = util::word_tokens(kw.keyword);
            if (kwtoks.empty() || toks.size() < kwtoks.size()) continue;
            bool all = true;
            for (std::size_t k = 0; k < kwtoks.size(); ++k)
                if (toks[k].lower() != kwtoks[k]) all = false;
            if (all) leading_signal = true;
        }

        // trailing "when <cond>" defers every earlier action in the sentence
        std::optional<std::size_t> when_pos;
        std::string defer_condition;
        for (std::size_t i = 1; i < toks.size(); ++i) {
            if (toks[i].lower() == "when" && i + 1 < toks.size()) {
                when_pos = i;
                std::vector<std::string> rest;
                for (std::size_t j = i + 1; j < toks.size(); ++j)
                    rest.push_back(toks[j].text);
                defer_condition = util::join(rest, " ");
                break;
            }
        }

        std::set<std::size_t> positions;
        if (!leading_signal) {
            std::size_t i = 0;
            while (i < toks.size() &&
                   (skip_words().count(toks[i].lower()) ||
                    util::ends_with(toks[i].lower(), "ly")))
                ++i;
            if (i < toks.size()) {
                if (toks[i].lower() == "let") {
                    std::size_t j = i + 1;
                    if (j < toks.size() &&
                        (toks[j].lower() == "it" || articles().count(toks[j].lower())))
                        ++j;
                    if (j < toks.size()) positions.insert(j);
                } else {
                    positions.insert(i);
                }
            }
        }
        for (std::size_t i = 1; i < toks.size(); ++i) {
            bool after_comma = gap_contains(step_text, toks[i - 1].end - step_begin,
                                            toks[i].begin - step_begin, ',') ||
                               gap_contains(step_text, toks[i - 1].end - step_begin,
                                            toks[i].begin - step_begin, ';');
            bool after_coord =
                toks[i - 1].lower() == "and" || toks[i - 1].lower() == "then";
            if (after_comma || after_coord) positions.insert(i);
            // ", and <verb>"
            if (after_comma && i + 1 < toks.size() &&
                (toks[i].lower() == "and" || toks[i].lower() == "then"))
                positions.insert(i + 1);
        }

        for (std::size_t i : positions) {
            const Token& t = toks[i];
            if (i > 0 && toks[i - 1].lower() == "to") continue;  // infinitive
            auto candidates = match_operation(t.text, spec, cfg);
            if (candidates.empty()) continue;
            ActionMention m;
            m.verb = t.text;
            m.begin = t.begin;
            m.end = t.end;
            m.sentence = si;
            m.negated = negated_at(toks, i);
            if (when_pos && i < *when_pos) {
                m.deferred = true;
                m.defer_condition = defer_condition;
            }
            const dsl::OperationSchema* op =
                spec.find_operation(candidates.front().operation);
            if (op) {
                const std::string lv = t.lower();
                for (const auto& d : op->durative_synonyms)
                    if (lv == util::lower(d)) m.durative = true;
            }
            m.candidates = std::move(candidates);
            out.push_back(std::move(m));
        }
    }
    std::sort(out.begin(), out.end(),
              [](const ActionMention& a, const ActionMention& b) {
                  return a.begin < b.begin;
              });
    return out;
}

namespace {

bool overlaps(std::size_t b1, std::size_t e1, std::size_t b2, std::size_t e2) {
    return b1 < e2 && b2 < e1;
}

void add_entity(std::vector<Entity>& out, Entity e) {
    for (const auto& prev : out)
        if (overlaps(prev.begin, prev.end, e.begin, e.end)) return;
    out.push_back(std::move(e));
}

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

// Case-insensitive whole-word search for `needle` in `hay`.
std::vector<std::size_t> find_word(const std::string& hay, const std::string& needle) {
    std::vector<std::size_t> hits;
    if (needle.empty()) return hits;
    const std::string h = util::lower(hay);
    const std::string n = util::lower(needle);
    std::size_t pos = 0;
    while ((pos = h.find(n, pos)) != std::string::npos) {
        bool left_ok = pos == 0 || !std::isalnum(static_cast<unsigned char>(h[pos - 1]));
        std::size_t after = pos + n.size();
        bool right_ok =
            after >= h.size() || !std::isalnum(static_cast<unsigned char>(h[after]));
        // allow a plural 's' directly after
        if (!right_ok && after + 1 <= h.size() && h[after] == 's') {
            bool next_ok = after + 1 >= h.size() ||
                           !std::isalnum(static_cast<unsigned char>(h[after + 1]));
            if (next_ok) right_ok = true;
        }
        if (left_ok && right_ok) hits.push_back(pos);
        pos += n.size();
    }
    return hits;
}

void set_preposition_flags(std::vector<Entity>& entities, const std::string& raw) {
    for (auto& e : entities) {
        // scan the few tokens before the entity for a preposition
        std::size_t from = e.begin >= 12 ? e.begin - 12 : 0;
        auto toks = tokenize_with_spans(raw.substr(from, e.begin - from), from);
        for (auto it = toks.rbegin(); it != toks.rend(); ++it) {
            const std::string t = it->lower();
            if (articles().count(t)) continue;
            static const std::set<std::string> preps = {"to", "in", "into", "onto"};
            e.after_preposition = preps.count(t) > 0;
            break;
        }
    }
}

}  // namespace

std::vector<Entity> extract_entities(const Step& step, const ProtocolText& protocol,
                                     const dsl::DslSpec& spec,
                                     ExtractorGateway& gateway) {
    std::vector<Entity> out;
    const std::string& raw = protocol.raw;

    // 1. annotation markers: @reagent@, |duration|, <value>, {reagent}
    struct Marker {
        char open, close;
    };
    static const std::vector<Marker> markers = {
        {'@', '@'}, {'|', '|'}, {'<', '>'}, {'{', '}'}};
    for (const auto& [open, close] : markers) {
        std::size_t pos = step.begin;
        while (pos < step.end) {
            std::size_t b = raw.find(open, pos);
            if (b == std::string::npos || b >= step.end) break;
            std::size_t e = raw.find(close, b + 1);
            if (e == std::string::npos || e >= step.end) break;
            Entity ent;
            ent.begin = b + 1;
            ent.end = e;
            ent.surface = raw.substr(ent.begin, ent.end - ent.begin);
            if (open == '@' || open == '{') {
                ent.label = "reagent";
            } else {
                auto q = parse_quantity(ent.surface);
                if (q) {
                    ent.quantity = q;
                    ent.label = label_for_dim(q->dim);
                } else {
                    ent.label = "other";
                }
            }
            ent.confidence = 1.0;
            if (!ent.surface.empty()) add_entity(out, std::move(ent));
            pos = e + 1;
        }
    }

    const std::string& body = step.text;

    // 2. alias proxies from the spec (longest first)
    {
        std::vector<std::pair<std::string, const dsl::ParamSchema*>> aliases;
        for (const auto& [pname, ps] : spec.parameters)
            for (const auto& [alias, q] : ps.aliases) aliases.emplace_back(alias, &ps);
        std::sort(aliases.begin(), aliases.end(), [](const auto& a, const auto& b) {
            return a.first.size() > b.first.size();
        });
        for (const auto& [alias, ps] : aliases) {
            for (std::size_t pos : find_word(body, alias)) {
                Entity ent;
                ent.begin = step.begin + pos;
                ent.end = ent.begin + alias.size();
                ent.surface = raw.substr(ent.begin, ent.end - ent.begin);
                ent.quantity = ps->aliases.at(alias);
                ent.label = ps->unit ? label_for_dim(*ps->unit) : "other";
                ent.confidence = 0.9;
                ent.from_alias = true;
                add_entity(out, std::move(ent));
            }
        }
    }

    // 3. container nouns
    for (const auto& noun : spec.container_nouns) {
        for (std::size_t pos : find_word(body, noun)) {
            Entity ent;
            ent.begin = step.begin + pos;
            std::size_t len = noun.size();
            if (ent.begin + len < step.end && raw[ent.begin + len] == 's') ++len;
            ent.end = ent.begin + len;
            ent.surface = raw.substr(ent.begin, ent.end - ent.begin);
            ent.label = "container";
            ent.confidence = 0.9;
            add_entity(out, std::move(ent));
        }
    }

    // 4. ingredient lexicon (full qualified name first)
    {
        std::vector<std::string> names;
        for (const auto& ing : protocol.ingredients) {
            if (!ing.qualifier.empty()) names.push_back(ing.full_name());
            names.push_back(ing.name);
        }
        std::sort(names.begin(), names.end(), [](const auto& a, const auto& b) {
            return a.size() > b.size();
        });
        for (const auto& name : names) {
            for (std::size_t pos : find_word(body, name)) {
                Entity ent;
                ent.begin = step.begin + pos;
                ent.end = ent.begin + name.size();
                ent.surface = raw.substr(ent.begin, ent.end - ent.begin);
                ent.label = "reagent";
                ent.confidence = 0.9;
                add_entity(out, std::move(ent));
            }
        }
    }

    // 5. generic recognizers via the extraction gateway
    for (const auto& [surface, label] : gateway.ner_extract(body, pseudo_label_set())) {
        const std::string ls = util::lower(surface);
        std::size_t pos = util::lower(body).find(ls);
        while (pos != std::string::npos) {
            Entity ent;
            ent.begin = step.begin + pos;
            ent.end = ent.begin + surface.size();
            ent.surface = raw.substr(ent.begin, ent.end - ent.begin);
            ent.label = label;
            ent.confidence = 0.85;
            ent.quantity = parse_quantity(surface);
            bool clash = false;
            for (const auto& prev : out)
                if (overlaps(prev.begin, prev.end, ent.begin, ent.end)) clash = true;
            if (!clash) {
                out.push_back(std::move(ent));
                break;
            }
            pos = util::lower(body).find(ls, pos + 1);
        }
    }

    // 6. count before a container noun ("into 2 separate ... flasks")
    {
        auto toks = tokenize_with_spans(body, step.begin);
        for (std::size_t i = 0; i < toks.size(); ++i) {
            const std::string t = toks[i].text;
            if (t.empty() || !std::isdigit(static_cast<unsigned char>(t[0]))) continue;
            bool all_digits = std::all_of(t.begin(), t.end(), [](unsigned char c) {
                return std::isdigit(c);
            });
            if (!all_digits) continue;
            for (std::size_t j = i + 1; j < std::min(toks.size(), i + 5); ++j) {
                bool is_container = false;
                for (const auto& noun : spec.container_nouns) {
                    std::string low = toks[j].lower();
                    if (low == noun || low == noun + "s") is_container = true;
                }
                if (is_container) {
                    Entity ent;
                    ent.begin = toks[i].begin;
                    ent.end = toks[i].end;
                    ent.surface = raw.substr(ent.begin, ent.end - ent.begin);
                    ent.label = "count";
                    ent.confidence = 0.8;
                    ent.quantity = Quantity{UnitDim::Count, std::stod(t), std::stod(t), ""};
                    add_entity(out, std::move(ent));
                    break;
                }
            }
        }
    }

    std::sort(out.begin(), out.end(),
              [](const Entity& a, const Entity& b) { return a.begin < b.begin; });
    set_preposition_flags(out, raw);
    return out;
}

namespace {

std::vector<ControlSignal> detect_signals(const Step& step,
                                          const dsl::DslSpec& spec) {
    std::vector<ControlSignal> out;
    auto sentences = split_sentences(step.text);
    for (auto [sb, se] : sentences) {
        const std::string sent = step.text.substr(sb, se - sb);
        auto toks = tokenize_with_spans(sent, step.begin + sb);
        if (toks.empty()) continue;
        for (const auto& kw : spec.control) {
            auto kwtoks = util::word_tokens(kw.keyword);
            if (kwtoks.empty() || toks.size() < kwtoks.size()) continue;
            bool all = true;
            for (std::size_t k = 0; k < kwtoks.size(); ++k)
                if (toks[k].lower() != kwtoks[k]) all = false;
            if (!all) continue;

            ControlSignal sig;
            sig.kind = kw.kind;
            sig.keyword = kw.keyword;
            sig.begin = toks.front().begin;

            if (kw.kind == "loop") {
                // "repeat <domain> until <condition>"; optional "N times"
                std::size_t until = toks.size();
                for (std::size_t i = kwtoks.size(); i < toks.size(); ++i)
                    if (toks[i].lower() == "until") until = i;
                std::vector<std::string> domain, cond;
                for (std::size_t i = kwtoks.size(); i < until; ++i)
                    domain.push_back(toks[i].text);
                for (std::size_t i = until + 1; i < toks.size(); ++i)
                    cond.push_back(toks[i].text);
                // stop the clauses at a coordinated follow-up ("then ...")
                for (auto* vec : {&domain, &cond}) {
                    auto it = std::find_if(vec->begin(), vec->end(), [](const std::string& w) {
                        return util::lower(w) == "then";
                    });
                    if (it != vec->end()) vec->erase(it, vec->end());
                }
                for (std::size_t i = kwtoks.size(); i + 1 < toks.size(); ++i) {
                    const std::string t = toks[i].text;
                    if (!t.empty() &&
                        std::all_of(t.begin(), t.end(),
                                    [](unsigned char c) { return std::isdigit(c); }) &&
                        toks[i + 1].lower() == "times")
                        sig.count = std::stod(t);
                }
                sig.governed = util::join(domain, " ");
                sig.clause = util::join(cond, " ");
                sig.end = toks.back().end;
            } else {
                // "once/when/if <clause>, <governed instruction>"
                std::size_t comma = sent.find(',', sb == 0 ? 0 : 0);
                comma = sent.find(',');
                if (comma == std::string::npos) continue;  // no governed part
                std::size_t clause_end = step.begin + sb + comma;
                std::vector<std::string> clause;
                for (const auto& t : toks) {
                    if (t.begin >= clause_end) break;
                    clause.push_back(t.text);
                }
                for (std::size_t k = 0; k < kwtoks.size() && !clause.empty(); ++k)
                    clause.erase(clause.begin());
                sig.clause = util::join(clause, " ");
                sig.end = clause_end + 1;
            }
            out.push_back(std::move(sig));
            break;  // one signal per sentence
        }
    }
    return out;
}

}  // namespace

EntitySequence analyze_protocol(const ProtocolText& protocol,
                                const dsl::DslSpec& spec,
                                ExtractorGateway& gateway,
                                const MatchConfig& cfg) {
    EntitySequence seq;
    for (std::size_t si = 0; si < protocol.steps.size(); ++si) {
        const Step& step = protocol.steps[si];
        StepAnalysis sa;
        sa.step_index = si;
        sa.actions = extract_actions(step.text, step.begin, spec, cfg);
        sa.signals = detect_signals(step, spec);
        sa.entities = extract_entities(step, protocol, spec, gateway);

        // verb-object fallback: an action clause with no reagent entity
        // takes its object noun phrase as a reagent candidate
        for (std::size_t ai = 0; ai < sa.actions.size(); ++ai) {
            const auto& action = sa.actions[ai];
            if (action.negated || action.deferred) continue;
            std::size_t clause_end = ai + 1 < sa.actions.size()
                                         ? sa.actions[ai + 1].begin
                                         : step.end;
            bool has_reagent = false;
            for (const auto& e : sa.entities)
                if (e.label == "reagent" && e.begin >= action.end &&
                    e.end <= clause_end)
                    has_reagent = true;
            if (has_reagent) continue;
            auto toks = tokenize_with_spans(
                protocol.raw.substr(action.end, clause_end - action.end), action.end);
            std::vector<Token> np;
            for (const auto& t : toks) {
                const std::string low = t.lower();
                if (articles().count(low)) continue;
                if (prepositions().count(low) || np_stopwords().count(low)) break;
                if (!t.text.empty() &&
                    std::isdigit(static_cast<unsigned char>(t.text[0])))
                    break;
                bool is_container = false;
                for (const auto& noun : spec.container_nouns)
                    if (low == noun || low == noun + "s") is_container = true;
                if (is_container) break;
                np.push_back(t);
                if (np.size() == 3) break;
            }
            if (!np.empty()) {
                Entity ent;
                ent.begin = np.front().begin;
                ent.end = np.back().end;
                ent.surface = protocol.raw.substr(ent.begin, ent.end - ent.begin);
                ent.label = "reagent";
                ent.confidence = 0.7;
                bool clash = false;
                for (const auto& prev : sa.entities)
                    if (overlaps(prev.begin, prev.end, ent.begin, ent.end))
                        clash = true;
                if (!clash) {
                    sa.entities.push_back(std::move(ent));
                    std::sort(sa.entities.begin(), sa.entities.end(),
                              [](const Entity& a, const Entity& b) {
                                  return a.begin < b.begin;
                              });
                }
            }
        }

        // mask entities inside control-signal clauses
        for (auto& e : sa.entities)
            for (const auto& sig : sa.signals)
                if (e.begin >= sig.begin && e.end <= sig.end)
                    e.in_signal_clause = true;

        bool actionable = false;
        for (const auto& a : sa.actions)
            if (!a.negated && !a.deferred) actionable = true;
        sa.no_action = !actionable;
        seq.steps.push_back(std::move(sa));
    }
    return seq;
}

}  // namespace protoflow::text
