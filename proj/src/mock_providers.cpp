#include "athena/mock_providers.hpp"

#include "athena/error.hpp"
#include "athena/text.hpp"

#include <cmath>

namespace athena {

MockEmbeddingProvider::MockEmbeddingProvider(std::size_t dimension)
    : dimension_(dimension) {
    if (dimension_ < 8) {
        throw Error(ErrorKind::Config, "mock embedding dimension must be >= 8");
    }
}

EmbeddingVector MockEmbeddingProvider::embed_one_text(const std::string& text,
                                                      std::size_t dimension) {
    std::vector<double> buckets(dimension, 0.0);
    const auto points = utf8_decode(text);
    auto add_gram = [&](const std::vector<char32_t>& gram) {
        std::string bytes = utf8_encode(gram);
        std::uint64_t h = fnv1a64(bytes);
        double sign = (h >> 63) ? 1.0 : -1.0;
        buckets[h % dimension] += sign;
    };
    if (points.size() < 2) {
        if (!points.empty()) add_gram({points[0]});
    } else {
        for (std::size_t i = 0; i + 1 < points.size(); ++i) {
            add_gram({points[i], points[i + 1]});
        }
    }
    double norm = 0.0;
    for (double v : buckets) norm += v * v;
    if (norm == 0.0) {
        buckets[fnv1a64(text) % dimension] = 1.0;
        norm = 1.0;
    }
    norm = std::sqrt(norm);
    EmbeddingVector vec;
    vec.values.reserve(dimension);
    for (double v : buckets) {
        vec.values.push_back(static_cast<float>(v / norm));
    }
    return vec;
}

std::vector<EmbeddingVector> MockEmbeddingProvider::embed(
    const std::vector<std::string>& texts) {
    if (texts.empty()) {
        throw Error(ErrorKind::Precondition, "embed requires at least one text");
    }
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (texts[i].empty()) {
            throw Error(ErrorKind::Precondition,
                        "embed input " + std::to_string(i) + " is empty");
        }
        out.push_back(embed_one_text(texts[i], dimension_));
    }
    calls_ += 1;
    return out;
}

std::string MockEmbeddingProvider::model_name() const {
    return "mock-ngram-" + std::to_string(dimension_);
}

std::string MockChatProvider::key(const std::string& method, const std::string& case_id) {
    return method + "\x1f" + case_id;
}

void MockChatProvider::script(const std::string& method, const std::string& case_id,
                              const std::string& completion) {
    scripted_[key(method, case_id)] = completion;
}

void MockChatProvider::script_error(const std::string& method, const std::string& case_id,
                                    const std::string& message) {
    errors_[key(method, case_id)] = message;
}

std::string MockChatProvider::chat(const std::vector<ChatTurn>& turns,
                                   const ChatRequestInfo* info) {
    validate_turns(turns);
    calls_ += 1;
    if (info) {
        const std::string k = key(info->method, info->case_id);
        if (auto it = errors_.find(k); it != errors_.end()) {
            throw Error(ErrorKind::ProviderExhausted, it->second);
        }
        if (auto it = scripted_.find(k); it != scripted_.end()) {
            return it->second;
        }
        if (info->method == "rewrite") {
            // Deterministic stand-in for the query-rewriting call.
            return "DEFINITION: 指" + info->case_id + "的犯罪行为。\n" +
                   "EXAMPLE: 某日，被告人实施了" + info->case_id +
                   "，情节严重，依法应予追究。";
        }
        if (!info->candidate_labels.empty()) {
            return "JUDGMENT: " + info->candidate_labels.front();
        }
    }
    return "UNDETERMINED";
}

}  // namespace athena
