#pragma once

#include "athena/corpus.hpp"
#include "athena/knowledge_base.hpp"
#include "athena/prompting.hpp"
#include "athena/providers.hpp"
#include "athena/retrieval.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace athena {

struct EvaluationRecord {
    std::string case_id;
    PromptMethod method = PromptMethod::baseline;
    std::size_t k_used = 0;  // candidates actually retrieved
    std::vector<std::string> retrieved_labels;
    int hit = 0;
    std::optional<std::string> predicted_label;
    ParseStatus parse_status = ParseStatus::failed;
    int correct = 0;
    std::chrono::milliseconds latency{0};
    std::string raw_completion;
};

struct ClassStats {
    std::size_t n = 0;
    double accuracy = 0.0;
    double hit_rate = 0.0;
};

struct RunConfigInfo {
    std::string chat_model;
    std::string embed_model;
    std::string method;
    std::string k;        // number or "inf"
    std::string kb_mode;  // empty when no KB involved
    std::string template_hash;
    std::uint64_t seed = 0;
    int workers = 1;
    bool mock = false;
};

struct Report {
    RunConfigInfo run_config;
    std::size_t n_cases = 0;
    double accuracy = 0.0;
    double hit_rate = 0.0;
    std::map<std::string, ClassStats> per_class;
    double average_accuracy = 0.0;
    std::optional<double> weighted_accuracy;
    double parse_failure_rate = 0.0;
};

struct EvaluationOptions {
    std::size_t k = k_all;
    int workers = 1;
    bool fail_fast = false;
    bool include_raw = true;
    // Attribute a case to every gold label instead of the first one.
    bool per_class_all_golds = false;
    std::function<std::chrono::steady_clock::time_point()> clock;
    RunConfigInfo config_info;
    std::optional<std::map<std::string, std::uint64_t>> reference_counts;
};

struct RunOutcome {
    Report report;
    std::vector<EvaluationRecord> records;  // dataset order
};

// Memoizes embeddings per input text so k-sweeps embed each fact once.
// Thread safe; bound to one inner embedder, whose model names the cache.
class CachingEmbeddingProvider : public EmbeddingProvider {
public:
    explicit CachingEmbeddingProvider(EmbeddingProvider& inner) : inner_(inner) {}

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
    std::string model_name() const override { return inner_.model_name(); }

    std::size_t cache_size() const;

private:
    EmbeddingProvider& inner_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, EmbeddingVector> cache_;
};

// Per case: (athena) embed fact, retrieve top-k, build prompt, chat,
// parse, score; (others) build prompt, chat, parse, score. Provider
// hard-failures mark the case failed/incorrect and the run continues
// unless fail_fast is set.
RunOutcome evaluate_run(const Dataset& dataset, PromptMethod method,
                        const KnowledgeBase* kb, ChatProvider& chat,
                        EmbeddingProvider* embedder, const PromptTemplates& templates,
                        const EvaluationOptions& options);

double accuracy(const std::vector<EvaluationRecord>& records);

double average_accuracy(const std::map<std::string, ClassStats>& per_class);

double weighted_accuracy(const std::map<std::string, ClassStats>& per_class,
                         const std::map<std::string, std::uint64_t>& reference_counts);

struct AblationRow {
    std::size_t k = 0;
    double accuracy = 0.0;
    double hit_rate = 0.0;
};

// One evaluate_run per k, fact embeddings cached across the sweep.
std::vector<AblationRow> ablate_k(
    const Dataset& dataset, const std::vector<std::size_t>& ks, const KnowledgeBase& kb,
    ChatProvider& chat, EmbeddingProvider& embedder, const PromptTemplates& templates,
    EvaluationOptions options,
    const std::function<void(std::size_t, const RunOutcome&)>& per_k_sink = {});

// Retrieval-only Hit Rate per k (no chat calls).
std::vector<double> hit_rate_curve(const Dataset& dataset, const KnowledgeBase& kb,
                                   const std::vector<std::size_t>& ks,
                                   EmbeddingProvider& embedder);

struct RewriteComparisonRow {
    std::size_t k = 0;
    double hit_rate_original = 0.0;
    double hit_rate_rewritten = 0.0;
};

// Paired Hit Rate curves over two stores of the same universe and
// embedder; refuses mismatched stores.
std::vector<RewriteComparisonRow> compare_rewriting(const Dataset& dataset,
                                                    const KnowledgeBase& kb_original,
                                                    const KnowledgeBase& kb_rewritten,
                                                    const std::vector<std::size_t>& ks,
                                                    EmbeddingProvider& embedder);

// --- persistence -----------------------------------------------------

void write_record_log(const std::string& path,
                      const std::vector<EvaluationRecord>& records,
                      bool include_raw = true);
std::vector<EvaluationRecord> read_record_log(const std::string& path);

void write_report_json(const std::string& path, const Report& report);
std::string report_to_json(const Report& report);

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows);
void write_per_class_csv(const std::string& path, const Report& report);
void write_rewrite_comparison_csv(const std::string& path,
                                  const std::vector<RewriteComparisonRow>& rows);

// CSV `label,count`, positive counts, optional header line.
std::map<std::string, std::uint64_t> read_reference_counts(const std::string& path);

}  // namespace athena
