#include "athena/providers.hpp"

#include "athena/error.hpp"

#include "httplib.h"
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

namespace athena {

namespace {

using nlohmann::json;

constexpr std::chrono::milliseconds kBackoffBase{1000};
constexpr std::chrono::milliseconds kBackoffCap{60000};

struct ParsedUrl {
    bool https = false;
    std::string host_port;  // "host" or "host:port"
    std::string path_prefix;
};

ParsedUrl parse_base_url(const std::string& base_url) {
    ParsedUrl parsed;
    std::string rest;
    if (base_url.rfind("https://", 0) == 0) {
        parsed.https = true;
        rest = base_url.substr(8);
    } else if (base_url.rfind("http://", 0) == 0) {
        rest = base_url.substr(7);
    } else {
        throw Error(ErrorKind::Config, "base_url must start with http:// or https://");
    }
    auto slash = rest.find('/');
    parsed.host_port = rest.substr(0, slash);
    if (slash != std::string::npos) {
        parsed.path_prefix = rest.substr(slash);
        while (!parsed.path_prefix.empty() && parsed.path_prefix.back() == '/') {
            parsed.path_prefix.pop_back();
        }
    }
    if (parsed.host_port.empty()) {
        throw Error(ErrorKind::Config, "base_url has no host: " + base_url);
    }
    return parsed;
}

bool is_retryable_status(int status) {
    return status == 429 || status == 408 || (status >= 500 && status < 600);
}

bool is_auth_status(int status) { return status == 401 || status == 403; }

std::chrono::milliseconds full_jitter_backoff(int attempt, std::mt19937_64& rng) {
    double ceiling = static_cast<double>(kBackoffBase.count()) * std::pow(2.0, attempt);
    ceiling = std::min(ceiling, static_cast<double>(kBackoffCap.count()));
    std::uniform_real_distribution<double> dist(0.0, ceiling);
    return std::chrono::milliseconds(static_cast<long>(dist(rng)));
}

// One POST per attempt; the passed parse callback turns a 2xx body into
// the final value or throws ProviderResponse (not retried).
template <typename Parse>
auto post_with_retries(const ProviderConfig& cfg, const TimeHooks& hooks,
                       RateLimiter* limiter, const std::string& endpoint,
                       const std::string& body, Parse parse) {
    const ParsedUrl url = parse_base_url(cfg.base_url);
    httplib::Client client(
        (url.https ? "https://" : "http://") + url.host_port);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout));
    httplib::Headers headers;
    if (!cfg.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + cfg.api_key);
    }
    const std::string path = url.path_prefix + endpoint;

    std::mt19937_64 rng(std::random_device{}());
    std::string last_failure = "no attempt made";
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        if (attempt > 0) {
            hooks.sleep(full_jitter_backoff(attempt - 1, rng));
        }
        if (limiter) limiter->acquire();
        auto result = client.Post(path, headers, body, "application/json");
        if (!result) {
            last_failure = "transport error: " + httplib::to_string(result.error());
            continue;  // connect/read failures are transient
        }
        if (result->status >= 200 && result->status < 300) {
            return parse(result->body);
        }
        if (is_auth_status(result->status)) {
            throw Error(ErrorKind::ProviderAuth,
                        "authentication failed (HTTP " + std::to_string(result->status) +
                            ") at " + path);
        }
        if (is_retryable_status(result->status)) {
            last_failure = "HTTP " + std::to_string(result->status);
            continue;
        }
        throw Error(ErrorKind::ProviderResponse,
                    "HTTP " + std::to_string(result->status) + " at " + path + ": " +
                        result->body);
    }
    throw Error(ErrorKind::ProviderExhausted,
                "retries exhausted after " + std::to_string(cfg.max_retries + 1) +
                    " attempts (" + last_failure + ")");
}

}  // namespace

const char* to_string(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
    }
    return "user";
}

void ProviderConfig::validate() const {
    if (max_retries < 0 || max_retries > 10) {
        throw Error(ErrorKind::Config, "max_retries must be in [0, 10]");
    }
    if (temperature < 0.0) {
        throw Error(ErrorKind::Config, "temperature must be >= 0");
    }
    if (requests_per_minute < 0) {
        throw Error(ErrorKind::Config, "requests_per_minute must be >= 0");
    }
    if (embed_batch_size < 1) {
        throw Error(ErrorKind::Config, "embed_batch_size must be >= 1");
    }
}

void validate_turns(const std::vector<ChatTurn>& turns) {
    if (turns.empty()) {
        throw Error(ErrorKind::Precondition, "chat requires at least one turn");
    }
    for (const auto& turn : turns) {
        if (turn.content.empty()) {
            throw Error(ErrorKind::Precondition, "chat turn content must be nonempty");
        }
    }
    if (turns.back().role != Role::user) {
        throw Error(ErrorKind::Precondition, "last chat turn must have role user");
    }
}

EmbeddingVector EmbeddingProvider::embed_one(const std::string& text) {
    auto vectors = embed({text});
    return std::move(vectors.front());
}

TimeHooks TimeHooks::real() {
    TimeHooks hooks;
    hooks.now = [] { return std::chrono::steady_clock::now(); };
    hooks.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    return hooks;
}

RateLimiter::RateLimiter(int requests_per_minute, TimeHooks hooks)
    : cap_(requests_per_minute), hooks_(std::move(hooks)) {}

void RateLimiter::acquire() {
    using namespace std::chrono;
    if (cap_ <= 0) return;
    std::unique_lock<std::mutex> lock(mutex_);
    for (;;) {
        auto now = hooks_.now();
        while (!window_.empty() && now - window_.front() >= 60s) {
            window_.pop_front();
        }
        if (window_.size() < static_cast<std::size_t>(cap_)) {
            window_.push_back(now);
            return;
        }
        auto wait = duration_cast<milliseconds>(window_.front() + 60s - now);
        lock.unlock();
        hooks_.sleep(std::max(wait, milliseconds(1)));
        lock.lock();
    }
}

HttpChatProvider::HttpChatProvider(ProviderConfig config, TimeHooks hooks,
                                   std::shared_ptr<RateLimiter> limiter)
    : config_(std::move(config)), hooks_(std::move(hooks)), limiter_(std::move(limiter)) {
    config_.validate();
    if (!limiter_) {
        limiter_ = std::make_shared<RateLimiter>(config_.requests_per_minute, hooks_);
    }
}

std::string HttpChatProvider::chat(const std::vector<ChatTurn>& turns,
                                   const ChatRequestInfo*) {
    validate_turns(turns);
    json messages = json::array();
    for (const auto& turn : turns) {
        messages.push_back({{"role", to_string(turn.role)}, {"content", turn.content}});
    }
    json body = {{"model", config_.model_name},
                 {"messages", messages},
                 {"temperature", config_.temperature}};

    return post_with_retries(
        config_, hooks_, limiter_.get(), "/chat/completions", body.dump(),
        [](const std::string& raw) -> std::string {
            json reply;
            try {
                reply = json::parse(raw);
            } catch (const json::exception& e) {
                throw Error(ErrorKind::ProviderResponse,
                            std::string("invalid completion JSON: ") + e.what());
            }
            if (!reply.contains("choices") || !reply["choices"].is_array() ||
                reply["choices"].empty()) {
                throw Error(ErrorKind::ProviderResponse, "completion has no choices");
            }
            const auto& message = reply["choices"][0]["message"];
            if (!message.contains("content") || !message["content"].is_string()) {
                throw Error(ErrorKind::ProviderResponse, "completion has no content");
            }
            std::string content = message["content"].get<std::string>();
            if (content.empty()) {
                throw Error(ErrorKind::ProviderResponse, "empty completion");
            }
            return content;
        });
}

HttpEmbeddingProvider::HttpEmbeddingProvider(ProviderConfig config, TimeHooks hooks,
                                             std::shared_ptr<RateLimiter> limiter)
    : config_(std::move(config)), hooks_(std::move(hooks)), limiter_(std::move(limiter)) {
    config_.validate();
    if (!limiter_) {
        limiter_ = std::make_shared<RateLimiter>(config_.requests_per_minute, hooks_);
    }
}

std::vector<EmbeddingVector> HttpEmbeddingProvider::embed(
    const std::vector<std::string>& texts) {
    if (texts.empty()) {
        throw Error(ErrorKind::Precondition, "embed requires at least one text");
    }
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (texts[i].empty()) {
            throw Error(ErrorKind::Precondition,
                        "embed input " + std::to_string(i) + " is empty");
        }
    }
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    const std::size_t batch = static_cast<std::size_t>(config_.embed_batch_size);
    for (std::size_t begin = 0; begin < texts.size(); begin += batch) {
        std::size_t end = std::min(texts.size(), begin + batch);
        json input = json::array();
        for (std::size_t i = begin; i < end; ++i) input.push_back(texts[i]);
        json body = {{"model", config_.model_name}, {"input", input}};

        auto vectors = post_with_retries(
            config_, hooks_, limiter_.get(), "/embeddings", body.dump(),
            [&](const std::string& raw) -> std::vector<EmbeddingVector> {
                json reply;
                try {
                    reply = json::parse(raw);
                } catch (const json::exception& e) {
                    throw Error(ErrorKind::ProviderResponse,
                                std::string("invalid embedding JSON: ") + e.what());
                }
                if (!reply.contains("data") || !reply["data"].is_array() ||
                    reply["data"].size() != end - begin) {
                    throw Error(ErrorKind::ProviderResponse,
                                "embedding response cardinality mismatch");
                }
                std::vector<EmbeddingVector> batch_out(end - begin);
                for (const auto& item : reply["data"]) {
                    // Responses may arrive unordered; `index` restores order.
                    std::size_t index = item.value("index", batch_out.size());
                    if (index >= batch_out.size()) {
                        throw Error(ErrorKind::ProviderResponse,
                                    "embedding index out of range");
                    }
                    EmbeddingVector vec;
                    for (const auto& v : item["embedding"]) {
                        vec.values.push_back(v.get<float>());
                    }
                    if (vec.values.empty()) {
                        throw Error(ErrorKind::ProviderResponse, "empty embedding");
                    }
                    batch_out[index] = std::move(vec);
                }
                return batch_out;
            });
        for (auto& vec : vectors) out.push_back(std::move(vec));
    }
    const std::size_t dim = out.front().dimension();
    for (const auto& vec : out) {
        if (vec.dimension() != dim) {
            throw Error(ErrorKind::DimensionMismatch,
                        "backend returned mixed embedding dimensions");
        }
    }
    return out;
}

}  // namespace athena
