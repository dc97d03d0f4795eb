#include "athena/prompting.hpp"

#include "athena/error.hpp"
#include "athena/text.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <sstream>

namespace athena {

namespace {

const char* kBaselineTemplate =
    "You are given the fact description of a criminal case. Decide which "
    "accusation applies to the defendant.\n"
    "\n"
    "Case facts:\n"
    "{FACT}\n"
    "\n"
    "Choose the accusation from this list:\n"
    "{UNIVERSE}\n"
    "\n"
    "{FORMAT}\n";

const char* kZeroShotCotTemplate =
    "You are given the fact description of a criminal case. Decide which "
    "accusation applies to the defendant.\n"
    "\n"
    "Case facts:\n"
    "{FACT}\n"
    "\n"
    "Choose the accusation from this list:\n"
    "{UNIVERSE}\n"
    "\n"
    "Let's think step by step.\n"
    "\n"
    "{FORMAT}\n";

const char* kSyllogismTemplate =
    "Legal syllogism is a form of deductive reasoning used in law: a legal "
    "norm serves as the major premise, the facts of the case serve as the "
    "minor premise, and the judgment follows as the conclusion. Apply legal "
    "syllogism to decide which accusation applies to the defendant.\n"
    "\n"
    "Case facts:\n"
    "{FACT}\n"
    "\n"
    "Choose the accusation from this list:\n"
    "{UNIVERSE}\n"
    "\n"
    "{FORMAT}\n";

const char* kAthenaTemplate =
    "You are given the fact description of a criminal case together with "
    "candidate accusations retrieved from a knowledge base, ordered from most "
    "to least similar. Decide which accusation applies to the defendant.\n"
    "\n"
    "Case facts:\n"
    "{FACT}\n"
    "\n"
    "Retrieved accusations, most similar first:\n"
    "{CANDIDATES}\n"
    "\n"
    "{FORMAT}\n";

const char* kRewriteTemplate =
    "You are an expert in criminal law. For the accusation \"{LABEL}\", "
    "provide:\n"
    "DEFINITION: a concise definition of this accusation.\n"
    "EXAMPLE: one concrete exemplary legal case in which a defendant commits "
    "this accusation, written as a fact narrative.\n"
    "Reply with exactly these two fields and nothing else.\n";

const char* kFormatInstruction =
    "Structure your answer as follows: first list the applicable legal norms, "
    "then the decisive case facts, then state your conclusion.\n"
    "The last line of your reply must be exactly:\n"
    "JUDGMENT: <accusation name>";

std::string join_universe(const std::vector<std::string>& universe) {
    std::string out;
    for (std::size_t i = 0; i < universe.size(); ++i) {
        if (i > 0) out += ", ";
        out += universe[i];
    }
    return out;
}

std::string render_candidates(const RetrievalResult& candidates) {
    std::ostringstream out;
    for (std::size_t i = 0; i < candidates.candidates.size(); ++i) {
        const auto& c = candidates.candidates[i];
        if (i > 0) out << "\n";
        out << "Candidate " << (i + 1) << ": " << c.label << "\n";
        if (!c.description.empty()) out << "Definition: " << c.description << "\n";
        if (!c.example.empty()) out << "Example: " << c.example << "\n";
    }
    return out.str();
}

std::string read_template_file(const std::filesystem::path& dir, const char* name) {
    auto path = dir / name;
    if (!std::filesystem::exists(path)) {
        throw Error(ErrorKind::Config, "missing prompt template: " + path.string());
    }
    return read_text_file(path.string());
}

// Matches a (trimmed) line of the form "JUDGMENT: x", ASCII
// case-insensitive, accepting the full-width colon.
std::optional<std::string> sentinel_payload(const std::string& line) {
    static const std::string kWord = "JUDGMENT";
    std::size_t i = 0;
    while (i < line.size() &&
           std::isspace(static_cast<unsigned char>(line[i]))) {
        ++i;
    }
    if (line.size() - i < kWord.size()) return std::nullopt;
    for (std::size_t j = 0; j < kWord.size(); ++j) {
        if (std::toupper(static_cast<unsigned char>(line[i + j])) != kWord[j]) {
            return std::nullopt;
        }
    }
    i += kWord.size();
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i < line.size() && line[i] == ':') {
        ++i;
    } else if (line.size() - i >= 3 && line.compare(i, 3, "\xEF\xBC\x9A") == 0) {
        i += 3;  // U+FF1A full-width colon
    } else {
        return std::nullopt;
    }
    return line.substr(i);
}

}  // namespace

PromptMethod prompt_method_from_string(const std::string& name) {
    if (name == "baseline") return PromptMethod::baseline;
    if (name == "zero-shot-cot" || name == "zero_shot_cot") {
        return PromptMethod::zero_shot_cot;
    }
    if (name == "syllogism") return PromptMethod::syllogism;
    if (name == "athena") return PromptMethod::athena;
    throw Error(ErrorKind::Config, "unknown prompt method: " + name);
}

const char* to_string(PromptMethod method) {
    switch (method) {
        case PromptMethod::baseline: return "baseline";
        case PromptMethod::zero_shot_cot: return "zero-shot-cot";
        case PromptMethod::syllogism: return "syllogism";
        case PromptMethod::athena: return "athena";
    }
    return "baseline";
}

const std::string& format_instruction() {
    static const std::string instruction = kFormatInstruction;
    return instruction;
}

PromptTemplates PromptTemplates::builtin() {
    PromptTemplates t;
    t.baseline = kBaselineTemplate;
    t.zero_shot_cot = kZeroShotCotTemplate;
    t.syllogism = kSyllogismTemplate;
    t.athena = kAthenaTemplate;
    t.rewrite = kRewriteTemplate;
    return t;
}

PromptTemplates PromptTemplates::load_dir(const std::string& dir) {
    std::filesystem::path base(dir);
    PromptTemplates t;
    t.baseline = read_template_file(base, "baseline.txt");
    t.zero_shot_cot = read_template_file(base, "zero_shot_cot.txt");
    t.syllogism = read_template_file(base, "syllogism.txt");
    t.athena = read_template_file(base, "athena.txt");
    t.rewrite = read_template_file(base, "rewrite.txt");
    return t;
}

const std::string& PromptTemplates::for_method(PromptMethod method) const {
    switch (method) {
        case PromptMethod::baseline: return baseline;
        case PromptMethod::zero_shot_cot: return zero_shot_cot;
        case PromptMethod::syllogism: return syllogism;
        case PromptMethod::athena: return athena;
    }
    return baseline;
}

std::string PromptTemplates::set_hash() const {
    return to_hex(fnv1a64(baseline + "\x1f" + zero_shot_cot + "\x1f" + syllogism +
                          "\x1f" + athena + "\x1f" + format_instruction()));
}

std::string PromptTemplates::rewrite_hash() const {
    return to_hex(fnv1a64(rewrite));
}

PromptBundle build_prompt(PromptMethod method, const LegalCase& legal_case,
                          const RetrievalResult* candidates,
                          const std::vector<std::string>& universe,
                          const PromptTemplates& templates) {
    if (method == PromptMethod::athena && candidates == nullptr) {
        throw Error(ErrorKind::Precondition, "athena prompt requires retrieval result");
    }
    if (method != PromptMethod::athena && candidates != nullptr) {
        throw Error(ErrorKind::Precondition,
                    std::string(to_string(method)) + " prompt takes no candidates");
    }

    PromptBundle bundle;
    bundle.method = method;
    bundle.case_id = legal_case.id;
    bundle.instructions_version = "v1:" + templates.set_hash();

    std::vector<std::pair<std::string, std::string>> values;
    values.emplace_back("FACT", legal_case.fact_text);
    values.emplace_back("FORMAT", format_instruction());
    if (method == PromptMethod::athena) {
        std::string block;
        if (candidates->candidates.empty()) {
            block = "(no candidates retrieved)\nChoose the accusation from this list:\n" +
                    join_universe(universe);
        } else {
            block = render_candidates(*candidates);
            for (const auto& c : candidates->candidates) {
                bundle.candidates_used.push_back(c.label);
            }
        }
        values.emplace_back("CANDIDATES", block);
    } else {
        values.emplace_back("UNIVERSE", join_universe(universe));
    }

    bundle.turns.push_back(
        {Role::user,
         substitute_placeholders(templates.for_method(method), values)});
    return bundle;
}

ParseStatus parse_status_from_string(const std::string& name) {
    if (name == "exact") return ParseStatus::exact;
    if (name == "fuzzy") return ParseStatus::fuzzy;
    if (name == "failed") return ParseStatus::failed;
    throw Error(ErrorKind::Parse, "unknown parse status: " + name);
}

const char* to_string(ParseStatus status) {
    switch (status) {
        case ParseStatus::exact: return "exact";
        case ParseStatus::fuzzy: return "fuzzy";
        case ParseStatus::failed: return "failed";
    }
    return "failed";
}

ParsedJudgment parse_judgment(const std::string& raw,
                              const std::vector<std::string>& universe) {
    ParsedJudgment judgment;
    judgment.raw_text = raw;

    // Step 1: last sentinel line.
    std::optional<std::string> payload;
    std::size_t pos = 0;
    while (pos <= raw.size()) {
        std::size_t eol = raw.find('\n', pos);
        std::string line =
            raw.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
        if (auto p = sentinel_payload(line)) payload = p;
        if (eol == std::string::npos) break;
        pos = eol + 1;
    }
    if (payload) {
        std::string normalized = normalize_label(*payload);
        for (const auto& label : universe) {
            if (label == normalized) {
                judgment.predicted_label = label;
                judgment.parse_status = ParseStatus::exact;
                return judgment;
            }
        }
    }

    // Step 2: longest universe label inside the trailing window.
    std::string_view window = utf8_tail(raw, 200);
    const std::string* best = nullptr;
    std::size_t best_length = 0;
    std::size_t best_pos = 0;
    for (const auto& label : universe) {
        if (label.empty()) continue;
        std::size_t found = window.find(label);
        if (found == std::string_view::npos) continue;
        std::size_t length = utf8_length(label);
        if (best == nullptr || length > best_length ||
            (length == best_length && found < best_pos)) {
            best = &label;
            best_length = length;
            best_pos = found;
        }
    }
    if (best) {
        judgment.predicted_label = *best;
        judgment.parse_status = ParseStatus::fuzzy;
        return judgment;
    }

    judgment.parse_status = ParseStatus::failed;
    return judgment;
}

}  // namespace athena
