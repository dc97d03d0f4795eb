#include "athena/providers.hpp"

#include "athena/error.hpp"
#include "athena/mock_providers.hpp"
#include "athena/retrieval.hpp"
#include "athena/text.hpp"

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"

#include <atomic>
#include <cmath>
#include <map>
#include <thread>

using namespace athena;
using nlohmann::json;

namespace {

// Virtual clock: sleeping advances time instead of blocking.
struct VirtualTime {
    std::atomic<long> now_ms{0};
    std::vector<std::chrono::milliseconds> sleeps;

    TimeHooks hooks() {
        TimeHooks h;
        h.now = [this] {
            return std::chrono::steady_clock::time_point(
                std::chrono::milliseconds(now_ms.load()));
        };
        h.sleep = [this](std::chrono::milliseconds d) {
            sleeps.push_back(d);
            now_ms += d.count();
        };
        return h;
    }
};

class ScopedServer {
public:
    ScopedServer() = default;

    int start() {
        port_ = server.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
        return port_;
    }

    ~ScopedServer() {
        server.stop();
        if (thread_.joinable()) thread_.join();
    }

    std::string base_url() const {
        return "http://127.0.0.1:" + std::to_string(port_);
    }

    httplib::Server server;

private:
    int port_ = 0;
    std::thread thread_;
};

ProviderConfig test_config(const std::string& base_url) {
    ProviderConfig cfg;
    cfg.base_url = base_url;
    cfg.api_key = "test-key";
    cfg.model_name = "test-model";
    cfg.max_retries = 4;
    cfg.timeout = std::chrono::seconds(5);
    cfg.requests_per_minute = 0;  // uncapped for these tests
    return cfg;
}

std::string chat_body(const std::string& content) {
    return json{{"choices", {{{"message", {{"content", content}}}}}}}.dump();
}

// Reference oracle for the mock embedder's similarity ordering: cosine
// over exact character-bigram count vectors, no hashing involved.
double bigram_cosine_oracle(const std::string& a, const std::string& b) {
    auto grams = [](const std::string& text) {
        std::map<std::string, int> counts;
        auto points = athena::utf8_decode(text);
        for (std::size_t i = 0; i + 1 < points.size(); ++i) {
            counts[athena::utf8_encode({points[i], points[i + 1]})] += 1;
        }
        return counts;
    };
    auto ga = grams(a);
    auto gb = grams(b);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [gram, count] : ga) {
        na += count * count;
        if (auto it = gb.find(gram); it != gb.end()) dot += count * it->second;
    }
    for (const auto& [gram, count] : gb) nb += count * count;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

TEST_CASE("chat turn preconditions") {
    MockChatProvider mock;
    CHECK_THROWS_AS(mock.chat({}), Error);
    CHECK_THROWS_AS(mock.chat({{Role::user, ""}}), Error);
    CHECK_THROWS_AS(mock.chat({{Role::assistant, "x"}}), Error);
}

TEST_CASE("provider config validation") {
    ProviderConfig cfg;
    cfg.max_retries = 11;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.max_retries = 5;
    cfg.temperature = -0.5;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.temperature = 0.0;
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("http chat returns completion content") {
    ScopedServer srv;
    std::string seen_auth;
    json seen_body;
    srv.server.Post("/v1/chat/completions",
                    [&](const httplib::Request& req, httplib::Response& res) {
                        seen_auth = req.get_header_value("Authorization");
                        seen_body = json::parse(req.body);
                        res.set_content(chat_body("答案"), "application/json");
                    });
    srv.start();

    HttpChatProvider provider(test_config(srv.base_url() + "/v1"));
    std::string reply = provider.chat({{Role::system, "s"}, {Role::user, "hello"}});
    CHECK(reply == "答案");
    CHECK(seen_auth == "Bearer test-key");
    CHECK(seen_body["model"] == "test-model");
    CHECK(seen_body["temperature"] == 0.0);
    REQUIRE(seen_body["messages"].size() == 2);
    CHECK(seen_body["messages"][0]["role"] == "system");
    CHECK(seen_body["messages"][1]["content"] == "hello");
}

TEST_CASE("two 429 responses then success: two backoffs, three attempts") {
    ScopedServer srv;
    std::atomic<int> attempts{0};
    srv.server.Post("/chat/completions",
                    [&](const httplib::Request&, httplib::Response& res) {
                        int n = ++attempts;
                        if (n <= 2) {
                            res.status = 429;
                            res.set_content("slow down", "text/plain");
                        } else {
                            res.set_content(chat_body("ok"), "application/json");
                        }
                    });
    srv.start();

    VirtualTime vt;
    HttpChatProvider provider(test_config(srv.base_url()), vt.hooks());
    std::string reply = provider.chat({{Role::user, "q"}});
    CHECK(reply == "ok");
    CHECK(attempts.load() == 3);
    REQUIRE(vt.sleeps.size() == 2);
    // full jitter: uniform in [0, base * 2^i]
    CHECK(vt.sleeps[0].count() <= 1000);
    CHECK(vt.sleeps[1].count() <= 2000);
}

TEST_CASE("auth failure is not retried") {
    ScopedServer srv;
    std::atomic<int> attempts{0};
    srv.server.Post("/chat/completions",
                    [&](const httplib::Request&, httplib::Response& res) {
                        ++attempts;
                        res.status = 401;
                    });
    srv.start();

    VirtualTime vt;
    HttpChatProvider provider(test_config(srv.base_url()), vt.hooks());
    try {
        provider.chat({{Role::user, "q"}});
        FAIL("expected auth error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ProviderAuth);
    }
    CHECK(attempts.load() == 1);
    CHECK(vt.sleeps.empty());
}

TEST_CASE("retries exhausted after max_retries + 1 attempts") {
    ScopedServer srv;
    std::atomic<int> attempts{0};
    srv.server.Post("/chat/completions",
                    [&](const httplib::Request&, httplib::Response& res) {
                        ++attempts;
                        res.status = 503;
                    });
    srv.start();

    VirtualTime vt;
    auto cfg = test_config(srv.base_url());
    cfg.max_retries = 2;
    HttpChatProvider provider(cfg, vt.hooks());
    try {
        provider.chat({{Role::user, "q"}});
        FAIL("expected exhaustion");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ProviderExhausted);
    }
    CHECK(attempts.load() == 3);
    CHECK(vt.sleeps.size() == 2);
}

TEST_CASE("empty completion is an error") {
    ScopedServer srv;
    srv.server.Post("/chat/completions",
                    [&](const httplib::Request&, httplib::Response& res) {
                        res.set_content(chat_body(""), "application/json");
                    });
    srv.start();

    HttpChatProvider provider(test_config(srv.base_url()));
    try {
        provider.chat({{Role::user, "q"}});
        FAIL("expected response error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ProviderResponse);
    }
}

TEST_CASE("http embeddings preserve order and batch") {
    ScopedServer srv;
    std::vector<std::size_t> batch_sizes;
    srv.server.Post("/embeddings",
                    [&](const httplib::Request& req, httplib::Response& res) {
                        json body = json::parse(req.body);
                        batch_sizes.push_back(body["input"].size());
                        json data = json::array();
                        // Echo index i as the vector [i, 1], reversed order on
                        // purpose; the client must restore it from `index`.
                        for (std::size_t i = body["input"].size(); i-- > 0;) {
                            double tag = static_cast<double>(
                                body["input"][i].get<std::string>().size());
                            data.push_back({{"index", i}, {"embedding", {tag, 1.0}}});
                        }
                        res.set_content(json{{"data", data}}.dump(), "application/json");
                    });
    srv.start();

    auto cfg = test_config(srv.base_url());
    cfg.embed_batch_size = 2;
    HttpEmbeddingProvider provider(cfg);
    auto vectors = provider.embed({"a", "bb", "ccc", "dddd", "eeeee"});
    REQUIRE(vectors.size() == 5);
    CHECK(batch_sizes == std::vector<std::size_t>{2, 2, 1});
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        CHECK(vectors[i].values[0] == doctest::Approx(static_cast<double>(i + 1)));
        CHECK(vectors[i].dimension() == 2);
    }

    CHECK_THROWS_AS(provider.embed({}), Error);
    try {
        provider.embed({"ok", ""});
        FAIL("expected precondition error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("1") != std::string::npos);
    }
}

TEST_CASE("rate limiter caps any 60s window") {
    VirtualTime vt;
    RateLimiter limiter(5, vt.hooks());
    std::vector<long> acquired_at;
    for (int i = 0; i < 12; ++i) {
        limiter.acquire();
        acquired_at.push_back(vt.now_ms.load());
    }
    // Window property: the 6th request after any request is >= 60s later.
    for (std::size_t i = 0; i + 5 < acquired_at.size(); ++i) {
        CHECK(acquired_at[i + 5] - acquired_at[i] >= 60000);
    }
}

TEST_CASE("rate limiter is shared across threads") {
    VirtualTime vt;
    auto hooks = vt.hooks();
    std::mutex sleep_mutex;
    auto base_sleep = hooks.sleep;
    hooks.sleep = [&](std::chrono::milliseconds d) {
        std::lock_guard<std::mutex> lock(sleep_mutex);
        base_sleep(d);
    };
    RateLimiter limiter(10, hooks);
    std::atomic<int> done{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < 4; ++t) {
        pool.emplace_back([&] {
            for (int i = 0; i < 10; ++i) {
                limiter.acquire();
                ++done;
            }
        });
    }
    for (auto& t : pool) t.join();
    CHECK(done.load() == 40);
    // 40 requests at 10/min need at least 3 whole windows of waiting.
    CHECK(vt.now_ms.load() >= 3 * 60000);
}

TEST_CASE("mock embedding is deterministic unit-norm") {
    MockEmbeddingProvider mock(32);
    auto a1 = mock.embed_one("盗窃罪 案例");
    auto a2 = mock.embed_one("盗窃罪 案例");
    CHECK(a1 == a2);
    CHECK(a1.dimension() == 32);
    double norm = 0.0;
    for (float v : a1.values) norm += static_cast<double>(v) * v;
    CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-6);

    CHECK_THROWS_AS(MockEmbeddingProvider(7), Error);
    CHECK_THROWS_AS(mock.embed({""}), Error);
}

TEST_CASE("mock embedding orders by shared n-grams") {
    const std::string query = "盗窃罪 案例";
    const std::string near = "盗窃 案件";
    const std::string far = "放火 案件";
    // Independent oracle first: exact bigram-count cosine.
    double oracle_near = bigram_cosine_oracle(query, near);
    double oracle_far = bigram_cosine_oracle(query, far);
    REQUIRE(oracle_near > oracle_far);

    MockEmbeddingProvider mock(64);
    double got_near = cosine_similarity(mock.embed_one(query), mock.embed_one(near));
    double got_far = cosine_similarity(mock.embed_one(query), mock.embed_one(far));
    CHECK(got_near > got_far);
}

TEST_CASE("mock embedding handles short strings") {
    MockEmbeddingProvider mock(16);
    auto vectors = mock.embed({"a", "b"});
    REQUIRE(vectors.size() == 2);
    CHECK(vectors[0] != vectors[1]);
    for (const auto& v : vectors) {
        CHECK(v.dimension() == 16);
        double norm = 0.0;
        for (float f : v.values) norm += static_cast<double>(f) * f;
        CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-6);
    }
}

TEST_CASE("mock chat: scripted, echo fallback, rewrite fallback") {
    MockChatProvider mock;
    mock.script("athena", "case-7", "X");
    ChatRequestInfo scripted{"athena", "case-7", {"A", "B"}};
    CHECK(mock.chat({{Role::user, "q"}}, &scripted) == "X");

    ChatRequestInfo echo{"athena", "case-8", {"盗窃", "放火"}};
    CHECK(mock.chat({{Role::user, "q"}}, &echo) == "JUDGMENT: 盗窃");

    ChatRequestInfo bare{"baseline", "case-9", {}};
    CHECK(mock.chat({{Role::user, "q"}}, &bare) == "UNDETERMINED");
    CHECK(mock.chat({{Role::user, "q"}}) == "UNDETERMINED");

    ChatRequestInfo rewrite{"rewrite", "盗窃", {}};
    std::string reply = mock.chat({{Role::user, "q"}}, &rewrite);
    CHECK(reply.find("DEFINITION:") != std::string::npos);
    CHECK(reply.find("EXAMPLE:") != std::string::npos);
    CHECK(reply.find("盗窃") != std::string::npos);

    MockChatProvider failing;
    failing.script_error("athena", "case-1", "boom");
    ChatRequestInfo info{"athena", "case-1", {}};
    CHECK_THROWS_AS(failing.chat({{Role::user, "q"}}, &info), Error);
}
