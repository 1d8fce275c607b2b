#ifndef PROTOFLOW_GATEWAY_HPP
#define PROTOFLOW_GATEWAY_HPP

#include <atomic>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace protoflow {

// Pluggable extraction gateway. The rule backend answers every request
// deterministically without network access; the service backend renders
// the appendix prompt templates and talks to an external language-model
// endpoint.
class ExtractorGateway {
public:
    virtual ~ExtractorGateway() = default;

    virtual std::vector<std::pair<std::string, std::string>> ner_extract(
        const std::string& text, const std::vector<std::string>& label_set) = 0;

    // Chooses exactly one candidate as the instruction's output.
    virtual std::string query_output(const std::string& instruction_json,
                                     const std::vector<std::string>& candidates) = 0;

    // Names the candidates that fill the instruction's omitted reagent
    // slots; may be empty.
    virtual std::vector<std::string> query_missing_reagents(
        const std::string& instruction_json,
        const std::vector<std::string>& candidates) = 0;

    virtual std::string backend_name() const = 0;

    // Count of answers produced by a degraded path (service fell back to
    // rules).
    virtual int degraded_answers() const { return 0; }
};

// Deterministic text rules: number+unit recognition, quantity-headed noun
// phrases, and name-overlap ranking.
class RuleBackend : public ExtractorGateway {
public:
    std::vector<std::pair<std::string, std::string>> ner_extract(
        const std::string& text,
        const std::vector<std::string>& label_set) override;
    std::string query_output(const std::string& instruction_json,
                             const std::vector<std::string>& candidates) override;
    std::vector<std::string> query_missing_reagents(
        const std::string& instruction_json,
        const std::vector<std::string>& candidates) override;
    std::string backend_name() const override { return "rule"; }
};

struct ServiceConfig {
    std::string endpoint;  // PROTOFLOW_LLM_ENDPOINT
    std::string api_key;   // PROTOFLOW_LLM_KEY; sent as a bearer header, never logged
    std::string model = "default";
    int max_tokens = 256;
    int timeout_ms = 30000;
    int retries = 2;
    int max_concurrent = 4;
    int request_budget = 500;  // per-run cost guard

    static ServiceConfig from_env();
};

// One POST of {model, prompt, max_tokens}; returns the raw response body.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual std::string post_json(const std::string& endpoint,
                                  const std::string& body) = 0;
};

std::unique_ptr<HttpTransport> make_httplib_transport(int timeout_ms);

// Recorded request/reply pairs keyed by prompt hash so the full pipeline
// replays offline.
class Cassette {
public:
    enum class Mode { Record, Replay };

    Cassette(std::string path, Mode mode);
    ~Cassette();

    std::optional<std::string> lookup(const std::string& prompt) const;
    void record(const std::string& prompt, const std::string& reply);
    void save() const;
    Mode mode() const { return mode_; }

private:
    struct Entry {
        std::string hash;
        std::string prompt;
        std::string reply;
    };
    std::string path_;
    Mode mode_;
    std::vector<Entry> entries_;
    mutable std::mutex mutex_;
};

class ServiceBackend : public ExtractorGateway {
public:
    ServiceBackend(ServiceConfig config,
                   std::unique_ptr<HttpTransport> transport = nullptr,
                   std::shared_ptr<Cassette> cassette = nullptr);

    std::vector<std::pair<std::string, std::string>> ner_extract(
        const std::string& text,
        const std::vector<std::string>& label_set) override;
    std::string query_output(const std::string& instruction_json,
                             const std::vector<std::string>& candidates) override;
    std::vector<std::string> query_missing_reagents(
        const std::string& instruction_json,
        const std::vector<std::string>& candidates) override;
    std::string backend_name() const override { return "service"; }

    int requests_made() const { return requests_.load(); }

private:
    std::string complete(const std::string& prompt);

    ServiceConfig config_;
    std::unique_ptr<HttpTransport> transport_;
    std::shared_ptr<Cassette> cassette_;
    std::atomic<int> requests_{0};
    // bounded-concurrency gate
    std::mutex gate_mutex_;
    std::condition_variable gate_cv_;
    int in_flight_ = 0;
};

// Service backend with rule fallback: extraction failures degrade to the
// rule answer and are counted instead of thrown.
class FallbackBackend : public ExtractorGateway {
public:
    explicit FallbackBackend(std::unique_ptr<ServiceBackend> service)
        : service_(std::move(service)) {}

    std::vector<std::pair<std::string, std::string>> ner_extract(
        const std::string& text,
        const std::vector<std::string>& label_set) override;
    std::string query_output(const std::string& instruction_json,
                             const std::vector<std::string>& candidates) override;
    std::vector<std::string> query_missing_reagents(
        const std::string& instruction_json,
        const std::vector<std::string>& candidates) override;
    std::string backend_name() const override { return "fallback"; }
    int degraded_answers() const override { return degraded_.load(); }

private:
    std::unique_ptr<ServiceBackend> service_;
    RuleBackend rules_;
    std::atomic<int> degraded_{0};
};

}  // namespace protoflow

#endif
