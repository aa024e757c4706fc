#include "carbonsum/providers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "carbonsum/util.hpp"

namespace carbonsum {

using nlohmann::json;

std::string to_string(ProviderKind kind) {
    switch (kind) {
        case ProviderKind::HttpChat: return "http-chat";
        case ProviderKind::HttpEmbed: return "http-embed";
        case ProviderKind::MockEcho: return "mock-echo";
        case ProviderKind::MockFixed: return "mock-fixed";
        case ProviderKind::MockHashEmbed: return "mock-hash-embed";
    }
    return "?";
}

ProviderKind provider_kind_from_string(const std::string& s) {
    if (s == "http-chat") return ProviderKind::HttpChat;
    if (s == "http-embed") return ProviderKind::HttpEmbed;
    if (s == "mock-echo") return ProviderKind::MockEcho;
    if (s == "mock-fixed") return ProviderKind::MockFixed;
    if (s == "mock-hash-embed") return ProviderKind::MockHashEmbed;
    throw std::invalid_argument("unknown provider kind: \"" + s + "\"");
}

ProviderSpec parse_provider_spec(const std::string& text) {
    ProviderSpec spec;
    std::stringstream ss(text);
    std::string piece;
    bool first = true;
    while (std::getline(ss, piece, ',')) {
        piece = trim(piece);
        if (piece.empty()) continue;
        if (first) {
            spec.kind = provider_kind_from_string(piece);
            first = false;
            continue;
        }
        auto eq = piece.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("provider spec: expected key=value, got \"" + piece + "\"");
        std::string key = trim(piece.substr(0, eq));
        std::string value = trim(piece.substr(eq + 1));
        if (key == "url") spec.endpoint_url = value;
        else if (key == "model") spec.model_name = value;
        else if (key == "params_b") spec.parameter_count_billions = std::stod(value);
        else if (key == "max_in_flight") spec.max_in_flight = std::stoi(value);
        else if (key == "timeout") spec.timeout_seconds = std::stod(value);
        else if (key == "api_key_env") spec.api_key_env = value;
        else if (key == "reply") spec.fixed_reply = value;
        else if (key == "max_attempts") spec.max_attempts = std::stoi(value);
        else if (key == "backoff_ms") spec.backoff_base_ms = std::stoi(value);
        else throw std::invalid_argument("provider spec: unknown key \"" + key + "\"");
    }
    if (first) throw std::invalid_argument("provider spec is empty");
    return spec;
}

namespace {

void check_spec(const ProviderSpec& spec) {
    if (spec.max_in_flight < 1)
        throw std::invalid_argument("provider spec: max_in_flight must be >= 1");
    bool http = spec.kind == ProviderKind::HttpChat || spec.kind == ProviderKind::HttpEmbed;
    if (http && (spec.endpoint_url.empty() || spec.model_name.empty()))
        throw std::invalid_argument("provider spec: http kinds require url and model");
}

void check_request(const GenerationRequest& request) {
    if (request.prompt.empty()) throw std::invalid_argument("generation prompt is empty");
    if (request.stop_after_tokens && *request.stop_after_tokens < 1)
        throw std::invalid_argument("stop_after_tokens must be >= 1");
}

/// Counting semaphore bounding simultaneous outstanding requests.
class InFlightLimiter {
public:
    explicit InFlightLimiter(int limit) : available_(limit) {}

    class Guard {
    public:
        explicit Guard(InFlightLimiter& limiter) : limiter_(limiter) { limiter_.acquire(); }
        ~Guard() { limiter_.release(); }
        Guard(const Guard&) = delete;
        Guard& operator=(const Guard&) = delete;

    private:
        InFlightLimiter& limiter_;
    };

private:
    void acquire() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return available_ > 0; });
        --available_;
    }
    void release() {
        {
            std::lock_guard lock(mutex_);
            ++available_;
        }
        cv_.notify_one();
    }

    std::mutex mutex_;
    std::condition_variable cv_;
    int available_;
};

/// Truncate to the first `limit` whitespace tokens, single-space joined.
std::string truncate_tokens(const std::string& text, long limit) {
    auto tokens = split_tokens(text);
    if (static_cast<long>(tokens.size()) <= limit) return text;
    std::string out;
    for (long i = 0; i < limit; ++i) {
        if (i) out += ' ';
        out += tokens[static_cast<size_t>(i)];
    }
    return out;
}

std::optional<long> effective_token_cap(const GenerationRequest& request) {
    std::optional<long> cap;
    if (request.max_tokens) cap = *request.max_tokens;
    if (request.stop_after_tokens)
        cap = cap ? std::min<long>(*cap, *request.stop_after_tokens) : *request.stop_after_tokens;
    return cap;
}

class ProviderBase : public Provider {
public:
    explicit ProviderBase(ProviderSpec spec)
        : spec_(std::move(spec)), limiter_(spec_.max_in_flight) {}
    const ProviderSpec& spec() const override { return spec_; }

protected:
    ProviderSpec spec_;
    InFlightLimiter limiter_;
};

class MockEchoProvider : public ProviderBase {
public:
    using ProviderBase::ProviderBase;
    bool can_generate() const override { return true; }
    bool can_embed() const override { return false; }

    GenerationResult generate(const GenerationRequest& request) override {
        check_request(request);
        InFlightLimiter::Guard guard(limiter_);
        GenerationResult result;
        result.text = request.prompt;
        if (auto cap = effective_token_cap(request)) result.text = truncate_tokens(result.text, *cap);
        result.prompt_tokens = static_cast<long>(count_tokens(request.prompt));
        result.completion_tokens = static_cast<long>(count_tokens(result.text));
        return result;
    }

    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>&) override {
        throw ProviderError("mock-echo cannot embed");
    }
};

class MockFixedProvider : public ProviderBase {
public:
    using ProviderBase::ProviderBase;
    bool can_generate() const override { return true; }
    bool can_embed() const override { return false; }

    GenerationResult generate(const GenerationRequest& request) override {
        check_request(request);
        InFlightLimiter::Guard guard(limiter_);
        GenerationResult result;
        result.text = spec_.fixed_reply;
        if (auto cap = effective_token_cap(request)) result.text = truncate_tokens(result.text, *cap);
        result.prompt_tokens = static_cast<long>(count_tokens(request.prompt));
        result.completion_tokens = static_cast<long>(count_tokens(result.text));
        return result;
    }

    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>&) override {
        throw ProviderError("mock-fixed cannot embed");
    }
};

constexpr size_t kHashEmbedDim = 64;

class MockHashEmbedProvider : public ProviderBase {
public:
    using ProviderBase::ProviderBase;
    bool can_generate() const override { return false; }
    bool can_embed() const override { return true; }

    GenerationResult generate(const GenerationRequest&) override {
        throw ProviderError("mock-hash-embed cannot generate");
    }

    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
        InFlightLimiter::Guard guard(limiter_);
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const auto& text : texts) out.push_back(embed_one(text));
        return out;
    }

private:
    /// Token-multiset bucket counts hashed with FNV-1a, then L2-normalized.
    /// Word order never matters; only the multiset of tokens does.
    EmbeddingVector embed_one(const std::string& text) const {
        auto tokens = split_tokens(text);
        if (tokens.empty())
            throw std::invalid_argument("mock-hash-embed: text has no tokens: \"" + text + "\"");
        EmbeddingVector vec;
        vec.encoder_id = spec_.model_name.empty() ? "mock-hash-embed" : spec_.model_name;
        vec.values.assign(kHashEmbedDim, 0.0);
        for (const auto& token : tokens)
            vec.values[fnv1a64(token) % kHashEmbedDim] += 1.0;
        double norm = l2_norm(vec.values);
        for (double& v : vec.values) v /= norm;
        return vec;
    }
};

struct ParsedUrl {
    std::string scheme_host_port;  // httplib::Client base
    std::string path_prefix;       // e.g. "/v1"
};

ParsedUrl parse_endpoint_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw std::invalid_argument("endpoint url must start with http:// or https://: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl parsed;
    if (path_start == std::string::npos) {
        parsed.scheme_host_port = url;
    } else {
        parsed.scheme_host_port = url.substr(0, path_start);
        parsed.path_prefix = url.substr(path_start);
        while (!parsed.path_prefix.empty() && parsed.path_prefix.back() == '/')
            parsed.path_prefix.pop_back();
    }
    return parsed;
}

bool retryable_status(int status) {
    return status == 408 || status == 429 || status >= 500;
}

class HttpProviderBase : public ProviderBase {
public:
    explicit HttpProviderBase(ProviderSpec spec) : ProviderBase(std::move(spec)) {
        url_ = parse_endpoint_url(spec_.endpoint_url);
        if (!spec_.api_key_env.empty()) {
            const char* key = std::getenv(spec_.api_key_env.c_str());
            if (!key || !*key)
                throw ProviderError("credential variable " + spec_.api_key_env + " is not set");
            api_key_ = key;
        }
    }

protected:
    /// POST with the fixed retry policy: at most max_attempts attempts,
    /// exponential backoff, identical request bytes each attempt.
    json post_json(const std::string& path, const std::string& body) {
        int last_status = 0;
        std::string last_error;
        for (int attempt = 1; attempt <= spec_.max_attempts; ++attempt) {
            if (attempt > 1) {
                auto delay = std::chrono::milliseconds(
                    spec_.backoff_base_ms * (1L << (attempt - 2)));
                std::this_thread::sleep_for(delay);
            }
            httplib::Client client(url_.scheme_host_port);
            client.set_connection_timeout(static_cast<time_t>(spec_.timeout_seconds), 0);
            client.set_read_timeout(static_cast<time_t>(spec_.timeout_seconds), 0);
            httplib::Headers headers;
            if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
            auto res = client.Post(url_.path_prefix + path, headers, body, "application/json");
            if (!res) {
                last_status = 0;
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 200) {
                try {
                    return json::parse(res->body);
                } catch (const json::parse_error& e) {
                    throw ProviderError("endpoint returned unparseable JSON: " +
                                            std::string(e.what()),
                                        res->status, attempt);
                }
            }
            last_status = res->status;
            last_error = res->body;  // endpoint error payload, surfaced verbatim
            if (res->status == 401 || res->status == 403)
                throw ProviderError("authentication failure (status " +
                                        std::to_string(res->status) + "): " + last_error,
                                    res->status, attempt);
            if (!retryable_status(res->status))
                throw ProviderError("endpoint error (status " + std::to_string(res->status) +
                                        "): " + last_error,
                                    res->status, attempt);
        }
        throw ProviderError("retries exhausted after " + std::to_string(spec_.max_attempts) +
                                " attempts (last status " + std::to_string(last_status) +
                                "): " + last_error,
                            last_status, spec_.max_attempts);
    }

    ParsedUrl url_;
    std::string api_key_;
};

class HttpChatProvider : public HttpProviderBase {
public:
    using HttpProviderBase::HttpProviderBase;
    bool can_generate() const override { return true; }
    bool can_embed() const override { return false; }

    GenerationResult generate(const GenerationRequest& request) override {
        check_request(request);
        InFlightLimiter::Guard guard(limiter_);
        json body = {
            {"model", spec_.model_name},
            {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
            {"temperature", request.temperature},
        };
        if (auto cap = effective_token_cap(request)) body["max_tokens"] = *cap;

        auto t0 = std::chrono::steady_clock::now();
        json reply = post_json("/chat/completions", body.dump());
        auto t1 = std::chrono::steady_clock::now();

        GenerationResult result;
        try {
            result.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            throw ProviderError("chat reply missing choices[0].message.content: " +
                                std::string(e.what()));
        }
        // Endpoint-reported usage takes precedence over whitespace counting.
        if (reply.contains("usage") && reply["usage"].contains("completion_tokens")) {
            result.prompt_tokens = reply["usage"].value("prompt_tokens", 0L);
            result.completion_tokens = reply["usage"]["completion_tokens"].get<long>();
        } else {
            result.prompt_tokens = static_cast<long>(count_tokens(request.prompt));
            result.completion_tokens = static_cast<long>(count_tokens(result.text));
        }
        if (request.stop_after_tokens)
            result.completion_tokens =
                std::min<long>(result.completion_tokens, *request.stop_after_tokens);
        result.wall_time_seconds = std::chrono::duration<double>(t1 - t0).count();
        return result;
    }

    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>&) override {
        throw ProviderError("http-chat cannot embed");
    }
};

class HttpEmbedProvider : public HttpProviderBase {
public:
    using HttpProviderBase::HttpProviderBase;
    bool can_generate() const override { return false; }
    bool can_embed() const override { return true; }

    GenerationResult generate(const GenerationRequest&) override {
        throw ProviderError("http-embed cannot generate");
    }

    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) override {
        if (texts.empty()) return {};
        InFlightLimiter::Guard guard(limiter_);
        json body = {{"model", spec_.model_name}, {"input", texts}};
        json reply = post_json("/embeddings", body.dump());
        std::vector<EmbeddingVector> out;
        try {
            const auto& data = reply.at("data");
            out.reserve(data.size());
            for (const auto& item : data) {
                EmbeddingVector vec;
                vec.encoder_id = spec_.model_name;
                vec.values = item.at("embedding").get<std::vector<double>>();
                out.push_back(std::move(vec));
            }
        } catch (const json::exception& e) {
            throw ProviderError("embedding reply missing data[i].embedding: " +
                                std::string(e.what()));
        }
        if (out.size() != texts.size())
            throw ProviderError("embedding reply count " + std::to_string(out.size()) +
                                " != input count " + std::to_string(texts.size()));
        return out;
    }
};

}  // namespace

double l2_norm(const std::vector<double>& values) {
    double sum = 0.0;
    for (double v : values) sum += v * v;
    return std::sqrt(sum);
}

ProviderHandle provider_from_spec(const ProviderSpec& spec) {
    check_spec(spec);
    switch (spec.kind) {
        case ProviderKind::MockEcho: return std::make_shared<MockEchoProvider>(spec);
        case ProviderKind::MockFixed: return std::make_shared<MockFixedProvider>(spec);
        case ProviderKind::MockHashEmbed: return std::make_shared<MockHashEmbedProvider>(spec);
        case ProviderKind::HttpChat: return std::make_shared<HttpChatProvider>(spec);
        case ProviderKind::HttpEmbed: return std::make_shared<HttpEmbedProvider>(spec);
    }
    throw std::invalid_argument("unknown provider kind");
}

}  // namespace carbonsum
