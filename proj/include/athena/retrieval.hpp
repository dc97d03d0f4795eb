#pragma once

#include "athena/knowledge_base.hpp"
#include "athena/providers.hpp"

#include <limits>
#include <string>
#include <vector>

namespace athena {

// k = all entries ranked ("infinity" in the run configuration).
inline constexpr std::size_t k_all = std::numeric_limits<std::size_t>::max();

struct Candidate {
    std::string label;
    std::string description;
    std::string example;
    double score;
};

struct RetrievalResult {
    std::string query_id;
    std::vector<Candidate> candidates;  // score descending, KB order on ties
    std::size_t k_requested = 0;
};

// dot(a,b) / (|a| * |b|), accumulated in double precision.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

// Exact scan over the whole store; ties keep KB insertion order.
RetrievalResult retrieve_top_k(const KnowledgeBase& kb, const EmbeddingVector& query,
                               std::size_t k, const std::string& query_id = "");

// 1 iff any gold label appears among the candidates.
int hit(const RetrievalResult& result, const std::vector<std::string>& gold_labels);

double hit_rate(const std::vector<int>& hits);

std::string k_to_string(std::size_t k);
std::size_t k_from_string(const std::string& text);

}  // namespace athena
