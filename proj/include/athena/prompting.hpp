#pragma once

#include "athena/corpus.hpp"
#include "athena/providers.hpp"
#include "athena/retrieval.hpp"

#include <optional>
#include <string>
#include <vector>

namespace athena {

enum class PromptMethod { baseline, zero_shot_cot, syllogism, athena };

PromptMethod prompt_method_from_string(const std::string& name);
const char* to_string(PromptMethod method);

// Prompt texts with {FACT}, {CANDIDATES}, {UNIVERSE}, {FORMAT} and
// {LABEL} placeholders. Defaults are compiled in; load_dir reads the
// same five files from a directory so the wording can be edited without
// rebuilding.
struct PromptTemplates {
    std::string baseline;
    std::string zero_shot_cot;
    std::string syllogism;
    std::string athena;
    std::string rewrite;

    static PromptTemplates builtin();
    static PromptTemplates load_dir(const std::string& dir);

    const std::string& for_method(PromptMethod method) const;

    // Hash over the four judgment templates plus the format instruction;
    // recorded in every report.
    std::string set_hash() const;
    // Hash of the rewriting template; recorded in KB provenance.
    std::string rewrite_hash() const;
};

// The output-format instruction substituted for {FORMAT}.
const std::string& format_instruction();

struct PromptBundle {
    PromptMethod method = PromptMethod::baseline;
    std::string case_id;
    std::vector<ChatTurn> turns;
    std::vector<std::string> candidates_used;  // rank order; empty for non-Athena
    std::string instructions_version;
};

// Deterministic assembly. Athena requires a retrieval result (its
// candidate list may be empty, in which case the label universe is
// included as a fallback); the other methods require none and get the
// universe so the answer space is closed.
PromptBundle build_prompt(PromptMethod method, const LegalCase& legal_case,
                          const RetrievalResult* candidates,
                          const std::vector<std::string>& universe,
                          const PromptTemplates& templates);

enum class ParseStatus { exact, fuzzy, failed };

ParseStatus parse_status_from_string(const std::string& name);
const char* to_string(ParseStatus status);

struct ParsedJudgment {
    std::optional<std::string> predicted_label;
    std::string raw_text;
    ParseStatus parse_status = ParseStatus::failed;
};

// Last `JUDGMENT: x` line wins when x normalizes to a universe label;
// otherwise the longest universe label found in the trailing 200
// characters (earliest occurrence breaks ties); otherwise failed.
ParsedJudgment parse_judgment(const std::string& raw,
                              const std::vector<std::string>& universe);

}  // namespace athena
