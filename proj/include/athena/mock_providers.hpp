#pragma once

#include "athena/providers.hpp"

#include <atomic>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace athena {

// Deterministic offline embedder: character-bigram signed hashing into a
// fixed number of buckets, L2-normalized. Strings sharing bigrams come
// out with higher cosine similarity, which is all the pipeline needs.
class MockEmbeddingProvider : public EmbeddingProvider {
public:
    explicit MockEmbeddingProvider(std::size_t dimension = 64);

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
    std::string model_name() const override;

    std::size_t dimension() const { return dimension_; }
    int call_count() const { return calls_.load(); }

    static EmbeddingVector embed_one_text(const std::string& text, std::size_t dimension);

private:
    std::size_t dimension_;
    std::atomic<int> calls_{0};
};

// Table-driven offline chat double. Completions are scripted per
// (method, case id); unscripted calls fall back to echoing the first
// retrieved candidate label in the required output format.
class MockChatProvider : public ChatProvider {
public:
    MockChatProvider() = default;

    void script(const std::string& method, const std::string& case_id,
                const std::string& completion);
    // Makes the matching call throw, for failure-path tests.
    void script_error(const std::string& method, const std::string& case_id,
                      const std::string& message);

    std::string chat(const std::vector<ChatTurn>& turns,
                     const ChatRequestInfo* info = nullptr) override;

    int call_count() const { return calls_.load(); }

private:
    static std::string key(const std::string& method, const std::string& case_id);

    std::map<std::string, std::string> scripted_;
    std::map<std::string, std::string> errors_;
    std::atomic<int> calls_{0};
};

}  // namespace athena
