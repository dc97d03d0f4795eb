#include "athena/config.hpp"

#include "athena/corpus.hpp"
#include "athena/error.hpp"
#include "athena/knowledge_base.hpp"
#include "athena/prompting.hpp"
#include "athena/retrieval.hpp"
#include "athena/text.hpp"

#include "json.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>

namespace athena {

namespace {

std::string unquote(const std::string& value) {
    if (value.size() >= 2 &&
        ((value.front() == '"' && value.back() == '"') ||
         (value.front() == '\'' && value.back() == '\''))) {
        return value.substr(1, value.size() - 2);
    }
    return value;
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t consumed = 0;
        long long parsed = std::stoll(value, &consumed);
        if (consumed != value.size()) throw std::invalid_argument("");
        return parsed;
    } catch (const std::exception&) {
        throw Error(ErrorKind::Config, "key `" + key + "`: not an integer: " + value);
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t consumed = 0;
        double parsed = std::stod(value, &consumed);
        if (consumed != value.size()) throw std::invalid_argument("");
        return parsed;
    } catch (const std::exception&) {
        throw Error(ErrorKind::Config, "key `" + key + "`: not a number: " + value);
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw Error(ErrorKind::Config, "key `" + key + "`: not a boolean: " + value);
}

}  // namespace

void RunConfig::apply_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot read config: " + path);
    }

    const std::map<std::string, std::function<void(const std::string&, const std::string&)>>
        setters = {
            {"base_url", [&](const std::string&, const std::string& v) { base_url = v; }},
            {"chat_model", [&](const std::string&, const std::string& v) { chat_model = v; }},
            {"embed_model", [&](const std::string&, const std::string& v) { embed_model = v; }},
            {"temperature", [&](const std::string& k, const std::string& v) { temperature = parse_double(k, v); }},
            {"max_retries", [&](const std::string& k, const std::string& v) { max_retries = static_cast<int>(parse_int(k, v)); }},
            {"timeout_seconds", [&](const std::string& k, const std::string& v) { timeout_seconds = static_cast<int>(parse_int(k, v)); }},
            {"requests_per_minute", [&](const std::string& k, const std::string& v) { requests_per_minute = static_cast<int>(parse_int(k, v)); }},
            {"embed_batch_size", [&](const std::string& k, const std::string& v) { embed_batch_size = static_cast<int>(parse_int(k, v)); }},
            {"templates_dir", [&](const std::string&, const std::string& v) { templates_dir = v; }},
            {"dataset", [&](const std::string&, const std::string& v) { dataset = v; }},
            {"dataset_format", [&](const std::string&, const std::string& v) { dataset_format = v; }},
            {"kb", [&](const std::string&, const std::string& v) { kb = v; }},
            {"kb_original", [&](const std::string&, const std::string& v) { kb_original = v; }},
            {"kb_rewritten", [&](const std::string&, const std::string& v) { kb_rewritten = v; }},
            {"labels", [&](const std::string&, const std::string& v) { labels = v; }},
            {"method", [&](const std::string&, const std::string& v) { method = v; }},
            {"k", [&](const std::string&, const std::string& v) { k = v; }},
            {"mode", [&](const std::string&, const std::string& v) { mode = v; }},
            {"ks", [&](const std::string&, const std::string& v) { ks = v; }},
            {"limit", [&](const std::string& k, const std::string& v) { limit = static_cast<std::uint64_t>(parse_int(k, v)); }},
            {"balanced_cap", [&](const std::string& k, const std::string& v) { balanced_cap = static_cast<std::uint64_t>(parse_int(k, v)); }},
            {"seed", [&](const std::string& k, const std::string& v) { seed = static_cast<std::uint64_t>(parse_int(k, v)); }},
            {"workers", [&](const std::string& k, const std::string& v) { workers = static_cast<int>(parse_int(k, v)); }},
            {"out_dir", [&](const std::string&, const std::string& v) { out_dir = v; }},
            {"ref_counts", [&](const std::string&, const std::string& v) { ref_counts = v; }},
            {"mock", [&](const std::string& k, const std::string& v) { mock = parse_bool(k, v); }},
            {"mock_dimension", [&](const std::string& k, const std::string& v) { mock_dimension = static_cast<int>(parse_int(k, v)); }},
            {"fail_fast", [&](const std::string& k, const std::string& v) { fail_fast = parse_bool(k, v); }},
            {"record_raw", [&](const std::string& k, const std::string& v) { record_raw = parse_bool(k, v); }},
        };

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::Config, path + " line " + std::to_string(line_no) +
                                               ": expected `key = value`");
        }
        std::string key = trim(stripped.substr(0, eq));
        std::string value = unquote(trim(stripped.substr(eq + 1)));
        if (key == "api_key") {
            throw Error(ErrorKind::Config,
                        path + " line " + std::to_string(line_no) +
                            ": secrets do not belong in config files; set ATHENA_API_KEY");
        }
        auto it = setters.find(key);
        if (it == setters.end()) {
            throw Error(ErrorKind::Config, path + " line " + std::to_string(line_no) +
                                               ": unknown key `" + key + "`");
        }
        it->second(key, value);
    }
}

void RunConfig::apply_env() {
    if (const char* key = std::getenv("ATHENA_API_KEY"); key && *key) {
        api_key = key;
    }
    if (const char* url = std::getenv("ATHENA_BASE_URL"); url && *url) {
        base_url = url;
    }
}

void RunConfig::validate() const {
    chat_provider_config().validate();
    embed_provider_config().validate();
    dataset_format_from_string(dataset_format);
    prompt_method_from_string(method);
    description_mode_from_string(mode);
    k_from_string(k);
    parse_k_list(ks);
    if (workers < 1) {
        throw Error(ErrorKind::Config, "workers must be >= 1");
    }
    if (mock && mock_dimension < 8) {
        throw Error(ErrorKind::Config, "mock_dimension must be >= 8");
    }
}

ProviderConfig RunConfig::chat_provider_config() const {
    ProviderConfig cfg;
    cfg.base_url = base_url;
    cfg.api_key = api_key;
    cfg.model_name = chat_model;
    cfg.temperature = temperature;
    cfg.max_retries = max_retries;
    cfg.timeout = std::chrono::seconds(timeout_seconds);
    cfg.requests_per_minute = requests_per_minute;
    cfg.embed_batch_size = embed_batch_size;
    return cfg;
}

ProviderConfig RunConfig::embed_provider_config() const {
    ProviderConfig cfg = chat_provider_config();
    cfg.model_name = embed_model;
    cfg.temperature = 0.0;
    return cfg;
}

std::string RunConfig::to_json() const {
    nlohmann::json doc;
    doc["base_url"] = base_url;
    doc["chat_model"] = chat_model;
    doc["embed_model"] = embed_model;
    doc["temperature"] = temperature;
    doc["max_retries"] = max_retries;
    doc["timeout_seconds"] = timeout_seconds;
    doc["requests_per_minute"] = requests_per_minute;
    doc["embed_batch_size"] = embed_batch_size;
    doc["templates_dir"] = templates_dir;
    doc["dataset"] = dataset;
    doc["dataset_format"] = dataset_format;
    doc["kb"] = kb;
    doc["kb_original"] = kb_original;
    doc["kb_rewritten"] = kb_rewritten;
    doc["labels"] = labels;
    doc["method"] = method;
    doc["k"] = k;
    doc["mode"] = mode;
    doc["ks"] = ks;
    doc["limit"] = limit;
    doc["balanced_cap"] = balanced_cap;
    doc["seed"] = seed;
    doc["workers"] = workers;
    doc["out_dir"] = out_dir;
    doc["ref_counts"] = ref_counts;
    doc["mock"] = mock;
    doc["mock_dimension"] = mock_dimension;
    doc["fail_fast"] = fail_fast;
    doc["record_raw"] = record_raw;
    return doc.dump(2) + "\n";
}

std::vector<std::size_t> parse_k_list(const std::string& csv) {
    std::vector<std::size_t> ks;
    std::string current;
    auto flush = [&] {
        std::string value = trim(current);
        current.clear();
        if (value.empty()) return;
        ks.push_back(k_from_string(value));
    };
    for (char c : csv) {
        if (c == ',') {
            flush();
        } else {
            current.push_back(c);
        }
    }
    flush();
    if (ks.empty()) {
        throw Error(ErrorKind::Config, "empty k list: `" + csv + "`");
    }
    return ks;
}

}  // namespace athena
