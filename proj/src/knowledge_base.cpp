#include "athena/knowledge_base.hpp"

#include "athena/error.hpp"
#include "athena/text.hpp"

#include "json.hpp"

#include <atomic>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <unordered_set>

namespace athena {

namespace {

using nlohmann::json;

constexpr int kKbFormatVersion = 1;

std::optional<RewriteResult> parse_rewrite(const std::string& raw) {
    auto def_pos = raw.find("DEFINITION:");
    if (def_pos == std::string::npos) return std::nullopt;
    auto ex_pos = raw.find("EXAMPLE:", def_pos);
    if (ex_pos == std::string::npos) return std::nullopt;
    RewriteResult result;
    result.description =
        trim(raw.substr(def_pos + 11, ex_pos - (def_pos + 11)));
    result.example = trim(raw.substr(ex_pos + 8));
    if (result.description.empty() || result.example.empty()) return std::nullopt;
    return result;
}

json entry_to_json(const AccusationEntry& entry) {
    json line;
    line["label"] = entry.label;
    line["description"] = entry.description;
    line["example"] = entry.example;
    json values = json::array();
    for (float v : entry.embedding.values) values.push_back(static_cast<double>(v));
    line["embedding"] = std::move(values);
    return line;
}

AccusationEntry entry_from_json(const json& line, const std::string& context) {
    if (!line.is_object() || !line.contains("label") || !line.contains("embedding") ||
        !line["embedding"].is_array()) {
        throw Error(ErrorKind::CorruptFile, context + ": malformed entry line");
    }
    AccusationEntry entry;
    entry.label = line["label"].get<std::string>();
    entry.description = line.value("description", "");
    entry.example = line.value("example", "");
    for (const auto& v : line["embedding"]) {
        entry.embedding.values.push_back(static_cast<float>(v.get<double>()));
    }
    if (entry.label.empty()) {
        throw Error(ErrorKind::CorruptFile, context + ": entry with empty label");
    }
    return entry;
}

void write_resume_file(const std::string& path,
                       const std::vector<AccusationEntry>& done) {
    if (path.empty()) return;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) return;  // resume persistence is best-effort during aborts
    for (const auto& entry : done) {
        out << entry_to_json(entry).dump() << "\n";
    }
}

std::unordered_map<std::string, AccusationEntry> read_resume_file(
    const std::string& path) {
    std::unordered_map<std::string, AccusationEntry> rows;
    if (path.empty() || !std::filesystem::exists(path)) return rows;
    std::ifstream in(path, std::ios::binary);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json parsed;
        try {
            parsed = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::CorruptFile, "resume file " + path + " line " +
                                                    std::to_string(line_no) + ": " +
                                                    e.what());
        }
        auto entry = entry_from_json(parsed, "resume file " + path);
        rows[entry.label] = std::move(entry);
    }
    return rows;
}

}  // namespace

DescriptionMode description_mode_from_string(const std::string& name) {
    if (name == "original") return DescriptionMode::original;
    if (name == "rewritten") return DescriptionMode::rewritten;
    throw Error(ErrorKind::Config, "unknown description mode: " + name);
}

const char* to_string(DescriptionMode mode) {
    return mode == DescriptionMode::original ? "original" : "rewritten";
}

std::vector<std::string> KnowledgeBase::labels() const {
    std::vector<std::string> out;
    out.reserve(entries.size());
    for (const auto& entry : entries) out.push_back(entry.label);
    return out;
}

const std::string& KnowledgeBase::embedded_text(const AccusationEntry& entry) const {
    return provenance.mode == DescriptionMode::original ? entry.label : entry.example;
}

std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

RewriteResult rewrite_accusation(const std::string& label, ChatProvider& chat,
                                 const std::string& rewrite_template) {
    if (label.empty()) {
        throw Error(ErrorKind::Precondition, "accusation label must be nonempty");
    }
    const std::string prompt =
        substitute_placeholders(rewrite_template, {{"LABEL", label}});
    ChatRequestInfo info{"rewrite", label, {}};

    std::string raw = chat.chat({{Role::user, prompt}}, &info);
    if (auto parsed = parse_rewrite(raw)) return *parsed;

    // One reprompt with the format restated, then give up.
    const std::string reminder =
        prompt +
        "\n\nYour previous reply could not be parsed. Respond again with exactly "
        "two fields, one starting with \"DEFINITION:\" and one with \"EXAMPLE:\".";
    raw = chat.chat({{Role::user, reminder}}, &info);
    if (auto parsed = parse_rewrite(raw)) return *parsed;

    throw Error(ErrorKind::ProviderResponse,
                "unparseable rewrite for label \"" + label + "\"; raw text: " + raw);
}

KnowledgeBase build_knowledge_base(const std::vector<std::string>& labels,
                                   const KbBuildOptions& options, ChatProvider* chat,
                                   EmbeddingProvider& embedder) {
    if (labels.empty()) {
        throw Error(ErrorKind::Precondition, "label list must be nonempty");
    }
    {
        std::unordered_set<std::string> seen;
        for (const auto& label : labels) {
            if (label.empty()) {
                throw Error(ErrorKind::Precondition, "label list contains empty label");
            }
            if (!seen.insert(label).second) {
                throw Error(ErrorKind::Precondition,
                            "label list contains duplicate: " + label);
            }
        }
    }
    if (options.mode == DescriptionMode::rewritten && chat == nullptr) {
        throw Error(ErrorKind::Precondition,
                    "rewritten mode requires a chat provider");
    }

    auto resume = read_resume_file(options.resume_path);
    const std::size_t n = labels.size();
    std::vector<AccusationEntry> entries(n);
    std::vector<char> has_embedding(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        entries[i].label = labels[i];
        if (auto it = resume.find(labels[i]); it != resume.end()) {
            entries[i] = it->second;
            has_embedding[i] = !entries[i].embedding.values.empty();
        }
    }

    // Persists whatever is complete so an aborted build can pick up where
    // it stopped (rows without an embedding are re-embedded on resume).
    auto persist_partials = [&](const std::vector<char>& rewritten_done) {
        std::vector<AccusationEntry> done;
        for (std::size_t i = 0; i < n; ++i) {
            if (rewritten_done[i]) done.push_back(entries[i]);
        }
        write_resume_file(options.resume_path, done);
    };

    if (options.mode == DescriptionMode::rewritten) {
        std::vector<char> rewritten_done(n, 0);
        std::vector<std::size_t> pending;
        for (std::size_t i = 0; i < n; ++i) {
            if (!entries[i].example.empty()) {
                rewritten_done[i] = 1;  // prefilled or resumed row
            } else {
                pending.push_back(i);
            }
        }
        if (!pending.empty()) {
            const int workers =
                std::max(1, std::min<int>(options.workers,
                                          static_cast<int>(pending.size())));
            std::atomic<std::size_t> next{0};
            std::atomic<bool> failed{false};
            std::mutex error_mutex;
            std::string failed_label;
            std::exception_ptr first_error;
            auto work = [&] {
                for (;;) {
                    std::size_t slot = next.fetch_add(1);
                    if (slot >= pending.size() || failed.load()) return;
                    std::size_t i = pending[slot];
                    try {
                        auto rewrite =
                            rewrite_accusation(labels[i], *chat, options.rewrite_template);
                        entries[i].description = rewrite.description;
                        entries[i].example = rewrite.example;
                        rewritten_done[i] = 1;
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(error_mutex);
                        if (!failed.exchange(true)) {
                            failed_label = labels[i];
                            first_error = std::current_exception();
                        }
                        return;
                    }
                }
            };
            std::vector<std::thread> pool;
            for (int w = 0; w < workers; ++w) pool.emplace_back(work);
            for (auto& t : pool) t.join();
            if (failed.load()) {
                persist_partials(rewritten_done);
                try {
                    std::rethrow_exception(first_error);
                } catch (const Error& e) {
                    throw Error(e.kind(), "building label \"" + failed_label +
                                              "\" failed: " + e.what());
                }
            }
        }

        std::vector<std::size_t> to_embed;
        std::vector<std::string> texts;
        for (std::size_t i = 0; i < n; ++i) {
            if (!has_embedding[i]) {
                to_embed.push_back(i);
                texts.push_back(entries[i].example);
            }
        }
        if (!to_embed.empty()) {
            std::vector<EmbeddingVector> vectors;
            try {
                vectors = embedder.embed(texts);
            } catch (const Error& e) {
                persist_partials(rewritten_done);
                throw Error(e.kind(), "embedding failed starting at label \"" +
                                          labels[to_embed.front()] + "\" (" +
                                          std::to_string(to_embed.size()) +
                                          " pending): " + e.what());
            }
            for (std::size_t j = 0; j < to_embed.size(); ++j) {
                entries[to_embed[j]].embedding = std::move(vectors[j]);
            }
        }
    } else {
        std::vector<std::size_t> to_embed;
        std::vector<std::string> texts;
        for (std::size_t i = 0; i < n; ++i) {
            entries[i].description.clear();
            entries[i].example.clear();
            if (!has_embedding[i]) {
                to_embed.push_back(i);
                texts.push_back(labels[i]);
            }
        }
        if (!to_embed.empty()) {
            std::vector<EmbeddingVector> vectors;
            try {
                vectors = embedder.embed(texts);
            } catch (const Error& e) {
                throw Error(e.kind(), "embedding failed starting at label \"" +
                                          labels[to_embed.front()] + "\" (" +
                                          std::to_string(to_embed.size()) +
                                          " pending): " + e.what());
            }
            for (std::size_t j = 0; j < to_embed.size(); ++j) {
                entries[to_embed[j]].embedding = std::move(vectors[j]);
            }
        }
    }

    KnowledgeBase kb;
    kb.entries = std::move(entries);
    kb.embedding_dimension = kb.entries.front().embedding.dimension();
    for (const auto& entry : kb.entries) {
        if (entry.embedding.dimension() != kb.embedding_dimension) {
            throw Error(ErrorKind::DimensionMismatch,
                        "entry \"" + entry.label + "\" has dimension " +
                            std::to_string(entry.embedding.dimension()) +
                            ", expected " + std::to_string(kb.embedding_dimension));
        }
    }
    kb.provenance.version = kKbFormatVersion;
    kb.provenance.mode = options.mode;
    kb.provenance.chat_model =
        options.mode == DescriptionMode::rewritten ? options.chat_model : "";
    kb.provenance.embed_model = embedder.model_name();
    kb.provenance.prompt_template_hash =
        options.mode == DescriptionMode::rewritten
            ? to_hex(fnv1a64(options.rewrite_template))
            : "";
    kb.provenance.built_at =
        options.built_at.empty() ? utc_timestamp() : options.built_at;
    return kb;
}

void save_kb(const KnowledgeBase& kb, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot write knowledge base: " + path);
    }
    json header;
    header["version"] = kb.provenance.version;
    header["dimension"] = kb.embedding_dimension;
    header["mode"] = to_string(kb.provenance.mode);
    header["chat_model"] = kb.provenance.chat_model;
    header["embed_model"] = kb.provenance.embed_model;
    header["prompt_template_hash"] = kb.provenance.prompt_template_hash;
    header["built_at"] = kb.provenance.built_at;
    out << header.dump() << "\n";
    for (const auto& entry : kb.entries) {
        out << entry_to_json(entry).dump() << "\n";
    }
    if (!out) {
        throw Error(ErrorKind::Io, "short write: " + path);
    }
}

KnowledgeBase load_kb(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot read knowledge base: " + path);
    }
    std::string line;
    if (!std::getline(in, line) || trim(line).empty()) {
        throw Error(ErrorKind::CorruptFile, path + ": missing header line");
    }
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::CorruptFile, path + ": invalid header: " + e.what());
    }
    if (!header.is_object() || !header.contains("version")) {
        throw Error(ErrorKind::CorruptFile, path + ": header has no version");
    }
    KnowledgeBase kb;
    int version = header["version"].get<int>();
    if (version != kKbFormatVersion) {
        throw Error(ErrorKind::VersionMismatch,
                    path + ": unsupported version " + std::to_string(version));
    }
    if (!header.contains("dimension") || !header.contains("mode")) {
        throw Error(ErrorKind::CorruptFile, path + ": incomplete header");
    }
    kb.provenance.version = version;
    kb.provenance.mode = description_mode_from_string(header["mode"].get<std::string>());
    kb.provenance.chat_model = header.value("chat_model", "");
    kb.provenance.embed_model = header.value("embed_model", "");
    kb.provenance.prompt_template_hash = header.value("prompt_template_hash", "");
    kb.provenance.built_at = header.value("built_at", "");
    kb.embedding_dimension = header["dimension"].get<std::size_t>();

    std::unordered_set<std::string> seen;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json parsed;
        try {
            parsed = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::CorruptFile,
                        path + " line " + std::to_string(line_no) + ": " + e.what());
        }
        auto entry = entry_from_json(parsed, path + " line " + std::to_string(line_no));
        if (entry.embedding.dimension() != kb.embedding_dimension) {
            throw Error(ErrorKind::DimensionMismatch,
                        path + " line " + std::to_string(line_no) + ": dimension " +
                            std::to_string(entry.embedding.dimension()) +
                            " != header dimension " +
                            std::to_string(kb.embedding_dimension));
        }
        if (!seen.insert(entry.label).second) {
            throw Error(ErrorKind::CorruptFile,
                        path + ": duplicate label " + entry.label);
        }
        kb.entries.push_back(std::move(entry));
    }
    if (kb.entries.empty()) {
        throw Error(ErrorKind::CorruptFile, path + ": no entries");
    }
    return kb;
}

}  // namespace athena
