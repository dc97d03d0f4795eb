#include "athena/retrieval.hpp"

#include "athena/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace athena {

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension()) {
        throw Error(ErrorKind::DimensionMismatch,
                    "cosine over dimensions " + std::to_string(a.dimension()) +
                        " and " + std::to_string(b.dimension()));
    }
    if (a.dimension() == 0) {
        throw Error(ErrorKind::Precondition, "cosine over empty vectors");
    }
    double dot = 0.0, norm_a = 0.0, norm_b = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double x = a.values[i];
        const double y = b.values[i];
        dot += x * y;
        norm_a += x * x;
        norm_b += y * y;
    }
    if (norm_a == 0.0 || norm_b == 0.0) {
        throw Error(ErrorKind::Precondition, "cosine over a zero vector");
    }
    return dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
}

RetrievalResult retrieve_top_k(const KnowledgeBase& kb, const EmbeddingVector& query,
                               std::size_t k, const std::string& query_id) {
    if (query.dimension() != kb.embedding_dimension) {
        throw Error(ErrorKind::DimensionMismatch,
                    "query dimension " + std::to_string(query.dimension()) +
                        " != kb dimension " + std::to_string(kb.embedding_dimension));
    }
    RetrievalResult result;
    result.query_id = query_id;
    result.k_requested = k;
    if (k == 0) return result;

    std::vector<double> scores(kb.entries.size());
    for (std::size_t i = 0; i < kb.entries.size(); ++i) {
        scores[i] = cosine_similarity(query, kb.entries[i].embedding);
    }
    std::vector<std::size_t> order(kb.entries.size());
    std::iota(order.begin(), order.end(), 0);
    // stable_sort keeps insertion order among equal scores.
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    const std::size_t take = std::min(k, kb.entries.size());
    result.candidates.reserve(take);
    for (std::size_t r = 0; r < take; ++r) {
        const auto& entry = kb.entries[order[r]];
        result.candidates.push_back(
            {entry.label, entry.description, entry.example, scores[order[r]]});
    }
    return result;
}

int hit(const RetrievalResult& result, const std::vector<std::string>& gold_labels) {
    for (const auto& candidate : result.candidates) {
        for (const auto& gold : gold_labels) {
            if (candidate.label == gold) return 1;
        }
    }
    return 0;
}

double hit_rate(const std::vector<int>& hits) {
    if (hits.empty()) {
        throw Error(ErrorKind::Precondition, "hit_rate over empty records");
    }
    double sum = 0.0;
    for (int h : hits) sum += h;
    return sum / static_cast<double>(hits.size());
}

std::string k_to_string(std::size_t k) {
    return k == k_all ? "inf" : std::to_string(k);
}

std::size_t k_from_string(const std::string& text) {
    std::string value = text;
    while (!value.empty() && (value.front() == ' ' || value.front() == '\t')) {
        value.erase(value.begin());
    }
    while (!value.empty() && (value.back() == ' ' || value.back() == '\t')) {
        value.pop_back();
    }
    if (value == "inf" || value == "infinity" || value == "all") return k_all;
    if (value.empty() ||
        value.find_first_not_of("0123456789") != std::string::npos) {
        throw Error(ErrorKind::Config, "invalid k: `" + text + "` (number or `inf`)");
    }
    try {
        return static_cast<std::size_t>(std::stoull(value));
    } catch (const std::exception&) {
        throw Error(ErrorKind::Config, "invalid k: `" + text + "` (number or `inf`)");
    }
}

}  // namespace athena
