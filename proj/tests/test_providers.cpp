#include <doctest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "carbonsum/providers.hpp"
#include "carbonsum/util.hpp"
#include "test_helpers.hpp"

using namespace carbonsum;
using nlohmann::json;

TEST_CASE("mock-echo echoes the prompt with its token count") {
    auto provider = test::echo_provider();
    GenerationRequest request;
    request.prompt = "abc";
    auto result = provider->generate(request);
    CHECK(result.text == "abc");
    CHECK(result.completion_tokens == 1);
    CHECK(result.prompt_tokens == 1);
    CHECK(result.wall_time_seconds == 0.0);
}

TEST_CASE("stop_after_tokens caps completion tokens for any generator") {
    std::mt19937 rng(7);
    auto echo = test::echo_provider();
    for (int trial = 0; trial < 200; ++trial) {
        int words = 1 + static_cast<int>(rng() % 30);
        std::string prompt;
        for (int w = 0; w < words; ++w) prompt += "w" + std::to_string(w) + " ";
        int k = 1 + static_cast<int>(rng() % 15);
        GenerationRequest request;
        request.prompt = prompt;
        request.stop_after_tokens = k;
        auto result = echo->generate(request);
        CHECK(result.completion_tokens <= k);
    }
    GenerationRequest ten;
    ten.prompt = "one two three four five six seven eight nine ten eleven twelve";
    ten.stop_after_tokens = 10;
    CHECK(echo->generate(ten).completion_tokens <= 10);
}

TEST_CASE("mock-fixed always returns the canned reply") {
    auto provider = test::fixed_provider("5");
    GenerationRequest request;
    request.prompt = "anything at all";
    CHECK(provider->generate(request).text == "5");
    CHECK(provider->generate(request).text == "5");
}

TEST_CASE("mock providers are pure functions of their inputs") {
    auto echo = test::echo_provider();
    GenerationRequest request;
    request.prompt = "a deterministic prompt with several tokens";
    auto a = echo->generate(request);
    auto b = echo->generate(request);
    CHECK(a.text == b.text);
    CHECK(a.completion_tokens == b.completion_tokens);

    auto embedder = test::hash_embedder();
    auto va = embedder->embed_batch({"same text twice"});
    auto vb = embedder->embed_batch({"same text twice"});
    CHECK(va[0].values == vb[0].values);
}

TEST_CASE("mock-hash-embed embeds into 64 normalized buckets") {
    auto embedder = test::hash_embedder();

    SUBCASE("identical texts give cosine similarity 1") {
        auto vectors = embedder->embed_batch({"warming is unequivocal", "warming is unequivocal"});
        REQUIRE(vectors.size() == 2);
        CHECK(vectors[0].values.size() == 64);
        double dot = 0;
        for (size_t i = 0; i < 64; ++i) dot += vectors[0].values[i] * vectors[1].values[i];
        CHECK(dot == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("output is L2-normalized within 1e-9") {
        auto vectors = embedder->embed_batch({"a b c", "some longer piece of text here"});
        for (const auto& vec : vectors)
            CHECK(std::abs(l2_norm(vec.values) - 1.0) < 1e-9);
    }
    SUBCASE("word order never changes the vector") {
        std::mt19937 rng(11);
        std::vector<std::string> words = {"ocean", "heat", "rise", "carbon", "ice", "risk"};
        for (int trial = 0; trial < 50; ++trial) {
            auto shuffled = words;
            std::shuffle(shuffled.begin(), shuffled.end(), rng);
            std::string a, b;
            for (const auto& w : words) a += w + " ";
            for (const auto& w : shuffled) b += w + " ";
            auto vectors = embedder->embed_batch({a, b});
            CHECK(vectors[0].values == vectors[1].values);
        }
    }
    SUBCASE("empty input list gives empty output") {
        CHECK(embedder->embed_batch({}).empty());
    }
    SUBCASE("whitespace-only text is rejected") {
        CHECK_THROWS_AS(embedder->embed_batch({"   "}), std::invalid_argument);
    }
}

TEST_CASE("provider_from_spec validates its configuration") {
    SUBCASE("unknown kind string") {
        CHECK_THROWS_AS(provider_kind_from_string("mock-nonsense"), std::invalid_argument);
    }
    SUBCASE("http kinds require url and model") {
        ProviderSpec spec;
        spec.kind = ProviderKind::HttpChat;
        CHECK_THROWS_AS(provider_from_spec(spec), std::invalid_argument);
    }
    SUBCASE("named but unset credential variable is a configuration error") {
        ProviderSpec spec;
        spec.kind = ProviderKind::HttpChat;
        spec.endpoint_url = "http://127.0.0.1:1/v1";
        spec.model_name = "m";
        spec.api_key_env = "CARBONSUM_TEST_UNSET_CREDENTIAL";
        ::unsetenv("CARBONSUM_TEST_UNSET_CREDENTIAL");
        CHECK_THROWS_WITH_AS(provider_from_spec(spec),
                             doctest::Contains("CARBONSUM_TEST_UNSET_CREDENTIAL"), ProviderError);
    }
    SUBCASE("max_in_flight below one") {
        ProviderSpec spec;
        spec.kind = ProviderKind::MockEcho;
        spec.max_in_flight = 0;
        CHECK_THROWS_AS(provider_from_spec(spec), std::invalid_argument);
    }
}

TEST_CASE("parse_provider_spec round-trips the compact syntax") {
    auto spec = parse_provider_spec(
        "http-chat,url=http://127.0.0.1:9999/v1,model=qwen,api_key_env=KEY,max_in_flight=2,"
        "timeout=5,params_b=1.8");
    CHECK(spec.kind == ProviderKind::HttpChat);
    CHECK(spec.endpoint_url == "http://127.0.0.1:9999/v1");
    CHECK(spec.model_name == "qwen");
    CHECK(spec.api_key_env == "KEY");
    CHECK(spec.max_in_flight == 2);
    CHECK(spec.parameter_count_billions == doctest::Approx(1.8));

    CHECK(parse_provider_spec("mock-echo").kind == ProviderKind::MockEcho);
    CHECK(parse_provider_spec("mock-fixed,reply=5").fixed_reply == "5");
    CHECK_THROWS_AS(parse_provider_spec("mock-echo,bogus=1"), std::invalid_argument);
}

namespace {

/// Loopback OpenAI-compatible endpoint; the handler is installed before
/// the server binds.
struct LocalServer {
    httplib::Server server;
    int port = 0;
    std::thread thread;

    explicit LocalServer(const std::function<void(httplib::Server&)>& setup) {
        setup(server);
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([&] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~LocalServer() {
        server.stop();
        thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1"; }
};

void default_routes(httplib::Server& server) {
    server.Post("/v1/chat/completions", [](const httplib::Request& req, httplib::Response& res) {
        json body = json::parse(req.body);
        std::string prompt = body["messages"][0]["content"];
        json reply = {
            {"choices",
             json::array(
                 {{{"message", {{"role", "assistant"}, {"content", "reply to: " + prompt}}}}})},
            {"usage", {{"prompt_tokens", 41}, {"completion_tokens", 7}}},
        };
        res.set_content(reply.dump(), "application/json");
    });
    server.Post("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
        json body = json::parse(req.body);
        json data = json::array();
        int index = 0;
        for (const auto& input : body["input"]) {
            double seed = static_cast<double>(input.get<std::string>().size());
            data.push_back({{"index", index++}, {"embedding", {seed, 1.0, 0.5}}});
        }
        res.set_content(json{{"data", data}}.dump(), "application/json");
    });
}

ProviderSpec http_spec(ProviderKind kind, const std::string& url) {
    ProviderSpec spec;
    spec.kind = kind;
    spec.endpoint_url = url;
    spec.model_name = "test-model";
    spec.timeout_seconds = 5;
    spec.backoff_base_ms = 1;
    return spec;
}

}  // namespace

TEST_CASE("http-chat talks the chat completions wire protocol") {
    LocalServer server(default_routes);
    auto provider = provider_from_spec(http_spec(ProviderKind::HttpChat, server.url()));
    GenerationRequest request;
    request.prompt = "hello";
    auto result = provider->generate(request);
    CHECK(result.text == "reply to: hello");
    // Endpoint-reported usage wins over whitespace counting.
    CHECK(result.prompt_tokens == 41);
    CHECK(result.completion_tokens == 7);
    CHECK(result.wall_time_seconds > 0.0);
}

TEST_CASE("http-chat sends temperature zero and max_tokens from stop_after_tokens") {
    json seen;
    LocalServer server([&](httplib::Server& s) {
        s.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
            seen = json::parse(req.body);
            json reply = {{"choices", json::array({{{"message", {{"content", "ok"}}}}})}};
            res.set_content(reply.dump(), "application/json");
        });
    });
    auto provider = provider_from_spec(http_spec(ProviderKind::HttpChat, server.url()));
    GenerationRequest request;
    request.prompt = "p";
    request.stop_after_tokens = 10;
    provider->generate(request);
    CHECK(seen["temperature"].get<double>() == 0.0);
    CHECK(seen["max_tokens"].get<int>() == 10);
    CHECK(seen["model"] == "test-model");
    CHECK(seen["messages"].size() == 1);
    CHECK(seen["messages"][0]["role"] == "user");
}

TEST_CASE("http-chat retries 429 and surfaces the last status") {
    std::atomic<int> hits{0};
    LocalServer server([&](httplib::Server& s) {
        s.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
            hits.fetch_add(1);
            res.status = 429;
            res.set_content("slow down", "text/plain");
        });
    });
    auto provider = provider_from_spec(http_spec(ProviderKind::HttpChat, server.url()));
    GenerationRequest request;
    request.prompt = "p";
    try {
        provider->generate(request);
        FAIL("expected ProviderError");
    } catch (const ProviderError& e) {
        CHECK(e.http_status() == 429);
        CHECK(e.attempts() == 3);
        CHECK(std::string(e.what()).find("slow down") != std::string::npos);
    }
    CHECK(hits.load() == 3);
}

TEST_CASE("http-chat fails fast on non-retryable errors with the payload verbatim") {
    LocalServer server([](httplib::Server& s) {
        s.Post("/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
            res.status = 400;
            res.set_content("{\"error\":\"bad model\"}", "application/json");
        });
    });
    auto provider = provider_from_spec(http_spec(ProviderKind::HttpChat, server.url()));
    GenerationRequest request;
    request.prompt = "p";
    CHECK_THROWS_WITH_AS(provider->generate(request), doctest::Contains("bad model"),
                         ProviderError);
}

TEST_CASE("http-chat sends the bearer credential from the environment") {
    std::string auth_seen;
    LocalServer server([&](httplib::Server& s) {
        s.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
            auth_seen = req.get_header_value("Authorization");
            json reply = {{"choices", json::array({{{"message", {{"content", "ok"}}}}})}};
            res.set_content(reply.dump(), "application/json");
        });
    });
    ::setenv("CARBONSUM_TEST_CREDENTIAL", "sk-test-123", 1);
    auto spec = http_spec(ProviderKind::HttpChat, server.url());
    spec.api_key_env = "CARBONSUM_TEST_CREDENTIAL";
    auto provider = provider_from_spec(spec);
    GenerationRequest request;
    request.prompt = "p";
    provider->generate(request);
    CHECK(auth_seen == "Bearer sk-test-123");
}

TEST_CASE("http-embed reads data[i].embedding in order") {
    LocalServer server(default_routes);
    auto provider = provider_from_spec(http_spec(ProviderKind::HttpEmbed, server.url()));
    auto vectors = provider->embed_batch({"ab", "abcd"});
    REQUIRE(vectors.size() == 2);
    CHECK(vectors[0].values == std::vector<double>{2.0, 1.0, 0.5});
    CHECK(vectors[1].values == std::vector<double>{4.0, 1.0, 0.5});
    CHECK(vectors[0].encoder_id == "test-model");
    CHECK(provider->embed_batch({}).empty());
}

TEST_CASE("capability mismatches are rejected") {
    auto echo = test::echo_provider();
    CHECK_THROWS_AS(echo->embed_batch({"x"}), ProviderError);
    auto embedder = test::hash_embedder();
    GenerationRequest request;
    request.prompt = "p";
    CHECK_THROWS_AS(embedder->generate(request), ProviderError);
}

TEST_CASE("a handle admits at most max_in_flight simultaneous requests") {
    std::atomic<int> in_flight{0};
    std::atomic<int> peak{0};
    LocalServer server([&](httplib::Server& s) {
        s.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
            int now = in_flight.fetch_add(1) + 1;
            int seen = peak.load();
            while (now > seen && !peak.compare_exchange_weak(seen, now)) {
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(30));
            in_flight.fetch_sub(1);
            json reply = {{"choices", json::array({{{"message", {{"content", "ok"}}}}})}};
            res.set_content(reply.dump(), "application/json");
        });
    });
    auto spec = http_spec(ProviderKind::HttpChat, server.url());
    spec.max_in_flight = 2;
    auto provider = provider_from_spec(spec);

    std::vector<std::thread> callers;
    for (int i = 0; i < 8; ++i)
        callers.emplace_back([&] {
            GenerationRequest request;
            request.prompt = "p";
            provider->generate(request);
        });
    for (auto& t : callers) t.join();
    CHECK(peak.load() <= 2);
    CHECK(peak.load() >= 1);
}
