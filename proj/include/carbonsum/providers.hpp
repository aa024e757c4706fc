#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace carbonsum {

enum class ProviderKind { HttpChat, HttpEmbed, MockEcho, MockFixed, MockHashEmbed };

std::string to_string(ProviderKind kind);
ProviderKind provider_kind_from_string(const std::string& s);

struct ProviderSpec {
    ProviderKind kind = ProviderKind::MockEcho;
    std::string endpoint_url;   // http kinds; e.g. http://127.0.0.1:8080/v1
    std::string model_name;
    std::optional<double> parameter_count_billions;  // for cost scaling
    int max_in_flight = 4;
    double timeout_seconds = 120.0;
    /// Name of the environment variable holding the credential. Empty means
    /// the endpoint is unauthenticated (local servers); a named but unset
    /// variable is a configuration error.
    std::string api_key_env;
    std::string fixed_reply;    // mock-fixed only
    int max_attempts = 3;
    int backoff_base_ms = 250;
};

/// Compact CLI syntax: "kind,key=value,..." e.g.
///   "http-chat,url=http://127.0.0.1:8080/v1,model=qwen,api_key_env=API_KEY"
///   "mock-fixed,reply=5"
ProviderSpec parse_provider_spec(const std::string& text);

struct GenerationRequest {
    std::string prompt;
    std::optional<int> max_tokens;
    /// Constrained generation: output stops after this many tokens.
    std::optional<int> stop_after_tokens;
    double temperature = 0.0;
};

struct GenerationResult {
    std::string text;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    double wall_time_seconds = 0.0;
};

struct EmbeddingVector {
    std::vector<double> values;
    std::string encoder_id;
};

class ProviderError : public std::runtime_error {
public:
    ProviderError(const std::string& what, int http_status = 0, int attempts = 0)
        : std::runtime_error(what), http_status_(http_status), attempts_(attempts) {}
    int http_status() const { return http_status_; }
    int attempts() const { return attempts_; }

private:
    int http_status_;
    int attempts_;
};

/// Uniform access to a generation or embedding backend. Handles are
/// shareable across threads; each enforces at most max_in_flight
/// simultaneous outstanding requests.
class Provider {
public:
    virtual ~Provider() = default;
    virtual const ProviderSpec& spec() const = 0;
    virtual bool can_generate() const = 0;
    virtual bool can_embed() const = 0;
    virtual GenerationResult generate(const GenerationRequest& request) = 0;
    virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) = 0;
};

using ProviderHandle = std::shared_ptr<Provider>;

/// Builds a usable handle; http kinds read their credential from
/// api_key_env at construction.
ProviderHandle provider_from_spec(const ProviderSpec& spec);

double l2_norm(const std::vector<double>& values);

}  // namespace carbonsum
