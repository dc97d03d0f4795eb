#pragma once

#include "athena/providers.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace athena {

// Flat key = value config file with `#` comments. Unknown keys are
// rejected; secrets never live here (api_key comes from the
// environment). Resolution order: defaults, file, env, CLI flags.
struct RunConfig {
    // provider
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key;  // ATHENA_API_KEY only
    std::string chat_model = "gpt-4o";
    std::string embed_model = "text-embedding-3-small";
    double temperature = 0.0;
    int max_retries = 5;
    int timeout_seconds = 30;
    int requests_per_minute = 60;
    int embed_batch_size = 128;

    // pipeline
    std::string templates_dir;  // empty = built-in templates
    std::string dataset;
    std::string dataset_format = "simple-jsonl";
    std::string kb;
    std::string kb_original;
    std::string kb_rewritten;
    std::string labels;
    std::string method = "athena";
    std::string k = "inf";
    std::string mode = "original";
    std::string ks = "0,1,2,4,8,16,32,64";
    std::uint64_t limit = 0;         // 0 = whole dataset
    std::uint64_t balanced_cap = 0;  // 0 = no balanced sampling
    std::uint64_t seed = 0;
    int workers = 1;
    std::string out_dir = "out";
    std::string ref_counts;
    bool mock = false;
    int mock_dimension = 64;
    bool fail_fast = false;
    bool record_raw = true;

    void apply_file(const std::string& path);
    void apply_env();
    void validate() const;

    ProviderConfig chat_provider_config() const;
    ProviderConfig embed_provider_config() const;

    // Resolved config as JSON for provenance files; omits the api key.
    std::string to_json() const;
};

std::vector<std::size_t> parse_k_list(const std::string& csv);

}  // namespace athena
