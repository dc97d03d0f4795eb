#pragma once

#include "athena/providers.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace athena {

enum class DescriptionMode { original, rewritten };

DescriptionMode description_mode_from_string(const std::string& name);
const char* to_string(DescriptionMode mode);

struct AccusationEntry {
    std::string label;
    std::string description;  // empty in original mode
    std::string example;      // empty in original mode
    EmbeddingVector embedding;

    bool operator==(const AccusationEntry&) const = default;
};

struct KbProvenance {
    int version = 1;
    DescriptionMode mode = DescriptionMode::original;
    std::string chat_model;   // empty when no rewriting was involved
    std::string embed_model;
    std::string prompt_template_hash;  // rewriting template, rewritten mode only
    std::string built_at;

    bool operator==(const KbProvenance&) const = default;
};

struct KnowledgeBase {
    std::vector<AccusationEntry> entries;
    std::size_t embedding_dimension = 0;
    KbProvenance provenance;

    std::vector<std::string> labels() const;
    // Text that was embedded for this entry: the bare label in original
    // mode, the generated example in rewritten mode.
    const std::string& embedded_text(const AccusationEntry& entry) const;

    bool operator==(const KnowledgeBase&) const = default;
};

struct RewriteResult {
    std::string description;
    std::string example;
};

// One chat call with the rewriting prompt; the completion must carry
// DEFINITION: and EXAMPLE: fields. An unparseable completion gets one
// reprompt, then fails with the raw text attached.
RewriteResult rewrite_accusation(const std::string& label, ChatProvider& chat,
                                 const std::string& rewrite_template);

struct KbBuildOptions {
    DescriptionMode mode = DescriptionMode::original;
    int workers = 1;
    std::string rewrite_template;  // required for rewritten mode
    std::string chat_model;
    std::string resume_path;  // completed rewrites persist here on failure
    std::string built_at;     // ISO-8601; empty picks wall-clock UTC
};

KnowledgeBase build_knowledge_base(const std::vector<std::string>& labels,
                                   const KbBuildOptions& options, ChatProvider* chat,
                                   EmbeddingProvider& embedder);

void save_kb(const KnowledgeBase& kb, const std::string& path);
KnowledgeBase load_kb(const std::string& path);

std::string utc_timestamp();

}  // namespace athena
