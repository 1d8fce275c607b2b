#include "protoflow/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <set>

#include <json.hpp>

#include "protoflow/errors.hpp"
#include "protoflow/prompts.hpp"
#include "protoflow/quantity.hpp"
#include "protoflow/util.hpp"

// keep httplib out of the header; OpenSSL not required for plain http
#define CPPHTTPLIB_THREAD_POOL_COUNT 4
#include <httplib.h>

namespace protoflow {

using nlohmann::json;

// ---------------------------------------------------------------------------
// rule backend

namespace {

const std::set<std::string>& rule_np_stop() {
    static const std::set<std::string> s = {
        "the", "a",   "an",  "to",  "in",  "into", "onto", "on",  "at",
        "with", "from", "of", "for", "as",  "until", "by",  "and", "or",
        "but", "more", "well", "also", "then", "when", "while", "it"};
    return s;
}

std::string dim_label(UnitDim d) {
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

std::size_t token_overlap(const std::string& a, const std::string& b) {
    auto ta = util::word_tokens(a);
    auto tb = util::word_tokens(b);
    std::set<std::string> sa(ta.begin(), ta.end());
    std::size_t n = 0;
    std::set<std::string> seen;
    for (const auto& t : tb)
        if (sa.count(t) && seen.insert(t).second) ++n;
    return n;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> RuleBackend::ner_extract(
    const std::string& text, const std::vector<std::string>& label_set) {
    std::vector<std::pair<std::string, std::string>> out;
    std::set<std::string> allowed(label_set.begin(), label_set.end());
    auto push = [&](const std::string& surface, const std::string& label) {
        std::string l = allowed.count(label) ? label : "other";
        for (const auto& [s, lbl] : out)
            if (s == surface && lbl == l) return;
        out.emplace_back(surface, l);
    };

    auto quantities = find_quantities(text);
    for (const auto& m : quantities)
        push(text.substr(m.begin, m.end - m.begin), dim_label(m.quantity.dim));

    // noun phrase immediately after a unit-bearing quantity, optionally
    // linked by "of": "10 g of sodium chloride", "35 mL water"
    for (const auto& m : quantities) {
        if (m.quantity.dim == UnitDim::Dimensionless ||
            m.quantity.dim == UnitDim::Count)
            continue;
        std::size_t pos = m.end;
        while (pos < text.size() &&
               !std::isalnum(static_cast<unsigned char>(text[pos])))
            ++pos;
        // consume optional "of" and articles
        auto next_word = [&](std::size_t p) {
            std::size_t b = p;
            while (b < text.size() &&
                   !std::isalpha(static_cast<unsigned char>(text[b])))
                ++b;
            std::size_t e = b;
            while (e < text.size() &&
                   (std::isalpha(static_cast<unsigned char>(text[e])) ||
                    text[e] == '-'))
                ++e;
            return std::pair<std::size_t, std::size_t>{b, e};
        };
        auto [b, e] = next_word(pos);
        bool saw_of = false;
        while (b < e) {
            std::string w = util::lower(text.substr(b, e - b));
            if (w == "of" || w == "the" || w == "a" || w == "an") {
                saw_of = saw_of || w == "of";
                std::tie(b, e) = next_word(e);
                continue;
            }
            break;
        }
        std::vector<std::string> np;
        std::size_t np_begin = b;
        std::size_t np_end = b;
        while (b < e) {
            std::string w = util::lower(text.substr(b, e - b));
            if (rule_np_stop().count(w)) break;
            if (std::isdigit(static_cast<unsigned char>(text[b]))) break;
            np.push_back(text.substr(b, e - b));
            np_end = e;
            if (np.size() == 3) break;
            std::size_t gap = e;
            bool punct = false;
            while (gap < text.size() &&
                   !std::isalnum(static_cast<unsigned char>(text[gap]))) {
                if (text[gap] == ',' || text[gap] == '.' || text[gap] == ';')
                    punct = true;
                ++gap;
            }
            if (punct) break;
            std::tie(b, e) = next_word(e);
        }
        (void)saw_of;
        if (!np.empty()) push(text.substr(np_begin, np_end - np_begin), "reagent");
    }
    return out;
}

std::string RuleBackend::query_output(const std::string& instruction_json,
                                      const std::vector<std::string>& candidates) {
    if (candidates.empty())
        throw ExtractionUnavailable("query_output needs at least one candidate");
    std::size_t best = 0;
    std::size_t best_overlap = token_overlap(instruction_json, candidates[0]);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        std::size_t ov = token_overlap(instruction_json, candidates[i]);
        if (ov > best_overlap) {
            best = i;
            best_overlap = ov;
        }
    }
    return candidates[best];
}

std::vector<std::string> RuleBackend::query_missing_reagents(
    const std::string& instruction_json,
    const std::vector<std::string>& candidates) {
    // how many reagent slots are empty in the record
    std::size_t missing = 0;
    std::size_t pos = 0;
    while ((pos = instruction_json.find("\"\"", pos)) != std::string::npos) {
        ++missing;
        pos += 2;
    }
    // the record's "output": "" also matches; it is not a reagent slot
    if (instruction_json.find("\"output\": \"\"") != std::string::npos && missing > 0)
        --missing;
    if (missing == 0 || candidates.empty()) return {};

    std::vector<std::pair<std::size_t, std::size_t>> ranked;  // (overlap, index)
    for (std::size_t i = 0; i < candidates.size(); ++i)
        ranked.emplace_back(token_overlap(instruction_json, candidates[i]), i);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::string> out;
    for (const auto& [ov, idx] : ranked) {
        if (out.size() == missing) break;
        out.push_back(candidates[idx]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// service backend

ServiceConfig ServiceConfig::from_env() {
    ServiceConfig cfg;
    if (const char* e = std::getenv("PROTOFLOW_LLM_ENDPOINT")) cfg.endpoint = e;
    if (const char* k = std::getenv("PROTOFLOW_LLM_KEY")) cfg.api_key = k;
    return cfg;
}

namespace {

class HttplibTransport : public HttpTransport {
public:
    explicit HttplibTransport(int timeout_ms) : timeout_ms_(timeout_ms) {}

    std::string post_json(const std::string& endpoint,
                          const std::string& body) override {
        // endpoint = http://host:port/path
        std::string rest = endpoint;
        std::string scheme = "http://";
        if (util::starts_with(rest, "http://")) rest = rest.substr(7);
        std::size_t slash = rest.find('/');
        std::string host = slash == std::string::npos ? rest : rest.substr(0, slash);
        std::string path = slash == std::string::npos ? "/" : rest.substr(slash);
        httplib::Client client((scheme + host).c_str());
        client.set_connection_timeout(0, timeout_ms_ * 1000);
        client.set_read_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
        httplib::Headers headers;
        if (const char* key = std::getenv("PROTOFLOW_LLM_KEY"))
            headers.emplace("Authorization", std::string("Bearer ") + key);
        auto res = client.Post(path.c_str(), headers, body, "application/json");
        if (!res)
            throw ExtractionUnavailable("service endpoint unreachable: " + host);
        if (res->status < 200 || res->status >= 300)
            throw ExtractionUnavailable("service returned status " +
                                        std::to_string(res->status));
        return res->body;
    }

private:
    int timeout_ms_;
};

std::string parse_reply_text(const std::string& body) {
    try {
        json j = json::parse(body);
        if (j.contains("text")) return j.at("text").get<std::string>();
        if (j.contains("choices") && !j.at("choices").empty()) {
            const auto& c = j.at("choices").at(0);
            if (c.contains("text")) return c.at("text").get<std::string>();
            if (c.contains("message"))
                return c.at("message").value("content", "");
        }
    } catch (const json::exception&) {
    }
    throw MalformedReply("service reply carries no text field");
}

std::string strip_quotes(std::string s) {
    s = util::trim(s);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
        s = s.substr(1, s.size() - 2);
    return util::trim(s);
}

}  // namespace

std::unique_ptr<HttpTransport> make_httplib_transport(int timeout_ms) {
    return std::make_unique<HttplibTransport>(timeout_ms);
}

Cassette::Cassette(std::string path, Mode mode)
    : path_(std::move(path)), mode_(mode) {
    if (mode_ == Mode::Replay) {
        json j = json::parse(util::read_file(path_));
        for (const auto& e : j)
            entries_.push_back({e.at("request_hash").get<std::string>(),
                                e.at("prompt").get<std::string>(),
                                e.at("reply").get<std::string>()});
    }
}

Cassette::~Cassette() {
    if (mode_ == Mode::Record) {
        try {
            save();
        } catch (...) {
        }
    }
}

std::optional<std::string> Cassette::lookup(const std::string& prompt) const {
    std::lock_guard<std::mutex> lock(mutex_);
    const std::string h = util::to_hex(util::fnv1a64(prompt));
    for (const auto& e : entries_)
        if (e.hash == h && e.prompt == prompt) return e.reply;
    return std::nullopt;
}

void Cassette::record(const std::string& prompt, const std::string& reply) {
    std::lock_guard<std::mutex> lock(mutex_);
    entries_.push_back({util::to_hex(util::fnv1a64(prompt)), prompt, reply});
}

void Cassette::save() const {
    std::lock_guard<std::mutex> lock(mutex_);
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& e : entries_)
        j.push_back(nlohmann::ordered_json{
            {"request_hash", e.hash}, {"prompt", e.prompt}, {"reply", e.reply}});
    util::write_file(path_, j.dump(2) + "\n");
}

ServiceBackend::ServiceBackend(ServiceConfig config,
                               std::unique_ptr<HttpTransport> transport,
                               std::shared_ptr<Cassette> cassette)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      cassette_(std::move(cassette)) {
    if (!transport_ && (!cassette_ || cassette_->mode() == Cassette::Mode::Record))
        transport_ = make_httplib_transport(config_.timeout_ms);
}

std::string ServiceBackend::complete(const std::string& prompt) {
    if (cassette_ && cassette_->mode() == Cassette::Mode::Replay) {
        auto hit = cassette_->lookup(prompt);
        if (!hit)
            throw ExtractionUnavailable("cassette has no entry for this prompt");
        return *hit;
    }

    int used = requests_.fetch_add(1) + 1;
    if (used > config_.request_budget)
        throw ExtractionUnavailable("request budget exhausted (" +
                                    std::to_string(config_.request_budget) + ")");

    {
        std::unique_lock<std::mutex> lock(gate_mutex_);
        gate_cv_.wait(lock, [&] { return in_flight_ < config_.max_concurrent; });
        ++in_flight_;
    }
    struct Release {
        ServiceBackend* self;
        ~Release() {
            {
                std::lock_guard<std::mutex> lock(self->gate_mutex_);
                --self->in_flight_;
            }
            self->gate_cv_.notify_one();
        }
    } release{this};

    json body;
    body["model"] = config_.model;
    body["prompt"] = prompt;
    body["max_tokens"] = config_.max_tokens;

    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        try {
            std::string reply =
                parse_reply_text(transport_->post_json(config_.endpoint, body.dump()));
            if (cassette_ && cassette_->mode() == Cassette::Mode::Record)
                cassette_->record(prompt, reply);
            return reply;
        } catch (const ExtractionUnavailable& e) {
            last_error = e.what();
        }
    }
    throw ExtractionUnavailable("service failed after retries: " + last_error);
}

std::vector<std::pair<std::string, std::string>> ServiceBackend::ner_extract(
    const std::string& text, const std::vector<std::string>& label_set) {
    const std::string prompt = prompts::render_ner_prompt(text, label_set);

    auto parse = [&](const std::string& reply)
        -> std::optional<std::vector<std::pair<std::string, std::string>>> {
        std::string body = util::trim(reply);
        // strict first, then a single bracketed-region salvage pass
        for (int pass = 0; pass < 2; ++pass) {
            std::string candidate = body;
            if (pass == 1) {
                std::size_t b = body.find('[');
                std::size_t e = body.rfind(']');
                if (b == std::string::npos || e == std::string::npos || e <= b)
                    return std::nullopt;
                candidate = body.substr(b, e - b + 1);
            }
            try {
                json j = json::parse(candidate);
                if (!j.is_array()) continue;
                std::vector<std::pair<std::string, std::string>> out;
                for (const auto& item : j) {
                    if (!item.is_object()) return std::nullopt;
                    for (const auto& [k, v] : item.items())
                        out.emplace_back(k, v.get<std::string>());
                }
                return out;
            } catch (const json::exception&) {
                continue;
            }
        }
        return std::nullopt;
    };

    auto result = parse(complete(prompt));
    if (!result) result = parse(complete(prompt));  // one re-ask
    if (!result) throw MalformedReply("NER reply is not a JSON entity list");
    return *result;
}

std::string ServiceBackend::query_output(const std::string& instruction_json,
                                         const std::vector<std::string>& candidates) {
    if (candidates.empty())
        throw ExtractionUnavailable("query_output needs at least one candidate");
    if (candidates.size() == 1) return candidates[0];  // short-circuit
    const std::string prompt =
        prompts::render_output_prompt(instruction_json, candidates);

    auto parse = [&](const std::string& reply) -> std::optional<std::string> {
        std::string choice = strip_quotes(reply);
        for (const auto& c : candidates)
            if (choice == c) return c;
        return std::nullopt;
    };
    auto result = parse(complete(prompt));
    if (!result) result = parse(complete(prompt));
    if (!result) {
        RuleBackend rules;
        return rules.query_output(instruction_json, candidates);
    }
    return *result;
}

std::vector<std::string> ServiceBackend::query_missing_reagents(
    const std::string& instruction_json,
    const std::vector<std::string>& candidates) {
    const std::string prompt =
        prompts::render_missing_reagents_prompt(instruction_json, candidates);

    auto parse = [&](const std::string& reply)
        -> std::optional<std::vector<std::string>> {
        std::string body = util::trim(reply);
        if (body.empty()) return std::vector<std::string>{};
        std::vector<std::string> out;
        std::size_t pos = 0;
        while (pos <= body.size()) {
            std::size_t comma = body.find(',', pos);
            std::string piece = comma == std::string::npos
                                    ? body.substr(pos)
                                    : body.substr(pos, comma - pos);
            std::string name = strip_quotes(piece);
            if (!name.empty()) {
                // filtered to the candidate list
                for (const auto& c : candidates)
                    if (name == c) out.push_back(c);
            }
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        return out;
    };
    auto result = parse(complete(prompt));
    if (!result) result = parse(complete(prompt));
    if (!result) throw MalformedReply("missing-reagents reply unparseable");
    return *result;
}

// ---------------------------------------------------------------------------
// fallback backend

std::vector<std::pair<std::string, std::string>> FallbackBackend::ner_extract(
    const std::string& text, const std::vector<std::string>& label_set) {
    try {
        return service_->ner_extract(text, label_set);
    } catch (const Error&) {
        ++degraded_;
        return rules_.ner_extract(text, label_set);
    }
}

std::string FallbackBackend::query_output(const std::string& instruction_json,
                                          const std::vector<std::string>& candidates) {
    try {
        return service_->query_output(instruction_json, candidates);
    } catch (const Error&) {
        ++degraded_;
        return rules_.query_output(instruction_json, candidates);
    }
}

std::vector<std::string> FallbackBackend::query_missing_reagents(
    const std::string& instruction_json,
    const std::vector<std::string>& candidates) {
    try {
        return service_->query_missing_reagents(instruction_json, candidates);
    } catch (const Error&) {
        ++degraded_;
        return rules_.query_missing_reagents(instruction_json, candidates);
    }
}

}  // namespace protoflow
