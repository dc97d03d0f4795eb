#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace athena {

struct LegalCase {
    std::string id;
    std::string fact_text;
    std::vector<std::string> gold_labels;  // nonempty, duplicate-free, order kept
    std::map<std::string, std::string> meta;

    const std::string& first_label() const { return gold_labels.front(); }
};

struct Dataset {
    std::vector<LegalCase> cases;
    std::vector<std::string> accusation_universe;  // first-occurrence order

    // Recomputes the universe from `cases` in first-occurrence order.
    static Dataset from_cases(std::vector<LegalCase> cases);

    std::size_t size() const { return cases.size(); }
};

enum class DatasetFormat { cail_jsonl, simple_jsonl };

DatasetFormat dataset_format_from_string(const std::string& name);
const char* to_string(DatasetFormat format);

// Reads one JSON object per line. cail-jsonl expects `fact` and
// `meta.accusation`; simple-jsonl expects `fact`, `labels` and an
// optional `id`. Labels are normalized at load time. A record with an
// empty fact or an empty label list is an error naming the line.
Dataset load_dataset(const std::string& path, DatasetFormat format);

// First min(n, |cases|) cases in source order; n = 0 is an error.
Dataset sample_head(const Dataset& dataset, std::size_t n);

// Keeps at most `cap` cases per label, keyed by each case's first gold
// label. Survivors are picked by a PRNG seeded with `seed`; output is
// ordered by (label in universe order, original position).
Dataset sample_balanced(const Dataset& dataset, std::size_t cap, std::uint64_t seed);

std::vector<std::string> dedup_accusations(const Dataset& dataset);

}  // namespace athena
