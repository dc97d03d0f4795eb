#pragma once

#include <chrono>
#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace athena {

enum class Role { system, user, assistant };

const char* to_string(Role role);

struct ChatTurn {
    Role role;
    std::string content;
};

struct ProviderConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key;
    std::string model_name;
    double temperature = 0.0;
    int max_retries = 5;  // at most 10
    std::chrono::milliseconds timeout{30000};
    int requests_per_minute = 60;  // 0 disables the cap
    int embed_batch_size = 128;

    void validate() const;
};

struct EmbeddingVector {
    std::vector<float> values;

    std::size_t dimension() const { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

// Side channel describing what a chat call is for. Live backends ignore
// it; the table-driven mock uses it to pick scripted completions.
struct ChatRequestInfo {
    std::string method;
    std::string case_id;
    std::vector<std::string> candidate_labels;  // retrieval rank order
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual std::string chat(const std::vector<ChatTurn>& turns,
                             const ChatRequestInfo* info = nullptr) = 0;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
    virtual std::string model_name() const = 0;

    EmbeddingVector embed_one(const std::string& text);
};

// Injectable clock/sleep pair so retry backoff and the rate window are
// testable with a virtual clock.
struct TimeHooks {
    std::function<std::chrono::steady_clock::time_point()> now;
    std::function<void(std::chrono::milliseconds)> sleep;

    static TimeHooks real();
};

// Sliding 60 s window shared by all workers of one provider.
class RateLimiter {
public:
    RateLimiter(int requests_per_minute, TimeHooks hooks = TimeHooks::real());

    // Blocks (via the sleep hook) until one more request fits the window.
    void acquire();

private:
    int cap_;
    TimeHooks hooks_;
    std::mutex mutex_;
    std::deque<std::chrono::steady_clock::time_point> window_;
};

// OpenAI-compatible chat backend: POST {base_url}/chat/completions.
// Transient failures (HTTP 429/5xx, timeouts) are retried with
// exponential backoff (base 1 s, doubling, full jitter) up to
// max_retries; auth failures are not retried.
class HttpChatProvider : public ChatProvider {
public:
    explicit HttpChatProvider(ProviderConfig config, TimeHooks hooks = TimeHooks::real(),
                              std::shared_ptr<RateLimiter> limiter = nullptr);

    std::string chat(const std::vector<ChatTurn>& turns,
                     const ChatRequestInfo* info = nullptr) override;

private:
    ProviderConfig config_;
    TimeHooks hooks_;
    std::shared_ptr<RateLimiter> limiter_;
};

// OpenAI-compatible embedding backend: POST {base_url}/embeddings.
// Requests are split into batches of at most embed_batch_size inputs.
class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    explicit HttpEmbeddingProvider(ProviderConfig config,
                                   TimeHooks hooks = TimeHooks::real(),
                                   std::shared_ptr<RateLimiter> limiter = nullptr);

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
    std::string model_name() const override { return config_.model_name; }

private:
    ProviderConfig config_;
    TimeHooks hooks_;
    std::shared_ptr<RateLimiter> limiter_;
};

void validate_turns(const std::vector<ChatTurn>& turns);

}  // namespace athena
