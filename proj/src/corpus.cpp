#include "athena/corpus.hpp"

#include "athena/error.hpp"
#include "athena/text.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <unordered_map>
#include <unordered_set>

namespace athena {

namespace {

using nlohmann::json;

std::vector<std::string> normalize_labels(const json& raw_labels, int line_no) {
    if (!raw_labels.is_array()) {
        throw Error(ErrorKind::Parse,
                    "line " + std::to_string(line_no) + ": labels must be an array");
    }
    std::vector<std::string> labels;
    std::unordered_set<std::string> seen;
    for (const auto& item : raw_labels) {
        if (!item.is_string()) {
            throw Error(ErrorKind::Parse,
                        "line " + std::to_string(line_no) + ": label is not a string");
        }
        std::string label = normalize_label(item.get<std::string>());
        if (label.empty()) continue;
        if (seen.insert(label).second) {
            labels.push_back(std::move(label));
        }
    }
    return labels;
}

LegalCase parse_record(const json& record, DatasetFormat format, int line_no) {
    if (!record.is_object()) {
        throw Error(ErrorKind::Parse,
                    "line " + std::to_string(line_no) + ": record is not a JSON object");
    }
    LegalCase legal_case;
    if (format == DatasetFormat::simple_jsonl && record.contains("id") &&
        record["id"].is_string()) {
        legal_case.id = record["id"].get<std::string>();
    }
    if (legal_case.id.empty()) {
        legal_case.id = "case-" + std::to_string(line_no);
    }

    if (!record.contains("fact") || !record["fact"].is_string()) {
        throw Error(ErrorKind::Parse,
                    "line " + std::to_string(line_no) + ": missing `fact` field");
    }
    legal_case.fact_text = trim(record["fact"].get<std::string>());
    if (legal_case.fact_text.empty()) {
        throw Error(ErrorKind::Parse,
                    "line " + std::to_string(line_no) + ": empty fact text");
    }

    if (format == DatasetFormat::cail_jsonl) {
        if (!record.contains("meta") || !record["meta"].is_object() ||
            !record["meta"].contains("accusation")) {
            throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) +
                                              ": missing `meta.accusation` field");
        }
        legal_case.gold_labels = normalize_labels(record["meta"]["accusation"], line_no);
    } else {
        if (!record.contains("labels")) {
            throw Error(ErrorKind::Parse,
                        "line " + std::to_string(line_no) + ": missing `labels` field");
        }
        legal_case.gold_labels = normalize_labels(record["labels"], line_no);
    }
    if (legal_case.gold_labels.empty()) {
        throw Error(ErrorKind::Parse,
                    "line " + std::to_string(line_no) + ": empty label list");
    }
    legal_case.meta["line"] = std::to_string(line_no);
    return legal_case;
}

}  // namespace

Dataset Dataset::from_cases(std::vector<LegalCase> cases) {
    Dataset dataset;
    dataset.cases = std::move(cases);
    std::unordered_set<std::string> seen;
    for (const auto& legal_case : dataset.cases) {
        for (const auto& label : legal_case.gold_labels) {
            if (seen.insert(label).second) {
                dataset.accusation_universe.push_back(label);
            }
        }
    }
    return dataset;
}

DatasetFormat dataset_format_from_string(const std::string& name) {
    if (name == "cail-jsonl") return DatasetFormat::cail_jsonl;
    if (name == "simple-jsonl") return DatasetFormat::simple_jsonl;
    throw Error(ErrorKind::Config, "unknown dataset format: " + name);
}

const char* to_string(DatasetFormat format) {
    return format == DatasetFormat::cail_jsonl ? "cail-jsonl" : "simple-jsonl";
}

Dataset load_dataset(const std::string& path, DatasetFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot read dataset: " + path);
    }
    std::vector<LegalCase> cases;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) +
                                              ": invalid JSON (" + e.what() + ")");
        }
        cases.push_back(parse_record(record, format, line_no));
    }
    if (cases.empty()) {
        throw Error(ErrorKind::Parse, "no valid cases in " + path);
    }
    return Dataset::from_cases(std::move(cases));
}

Dataset sample_head(const Dataset& dataset, std::size_t n) {
    if (n == 0) {
        throw Error(ErrorKind::Precondition, "sample size must be at least 1");
    }
    std::size_t take = std::min(n, dataset.cases.size());
    std::vector<LegalCase> cases(dataset.cases.begin(),
                                 dataset.cases.begin() + static_cast<long>(take));
    return Dataset::from_cases(std::move(cases));
}

Dataset sample_balanced(const Dataset& dataset, std::size_t cap, std::uint64_t seed) {
    if (cap == 0) {
        throw Error(ErrorKind::Precondition, "per-label cap must be at least 1");
    }
    std::unordered_map<std::string, std::vector<std::size_t>> by_first_label;
    for (std::size_t i = 0; i < dataset.cases.size(); ++i) {
        by_first_label[dataset.cases[i].first_label()].push_back(i);
    }
    std::mt19937_64 rng(seed);
    std::vector<LegalCase> sampled;
    for (const auto& label : dataset.accusation_universe) {
        auto it = by_first_label.find(label);
        if (it == by_first_label.end()) continue;
        std::vector<std::size_t> indices = it->second;
        if (indices.size() > cap) {
            // Partial Fisher-Yates: the first `cap` slots end up holding a
            // uniform sample; hand-rolled so the draw is identical across
            // standard libraries.
            for (std::size_t j = 0; j < cap; ++j) {
                std::size_t pick = j + static_cast<std::size_t>(
                                           rng() % (indices.size() - j));
                std::swap(indices[j], indices[pick]);
            }
            indices.resize(cap);
            std::sort(indices.begin(), indices.end());
        }
        for (std::size_t index : indices) {
            sampled.push_back(dataset.cases[index]);
        }
    }
    return Dataset::from_cases(std::move(sampled));
}

std::vector<std::string> dedup_accusations(const Dataset& dataset) {
    return dataset.accusation_universe;
}

}  // namespace athena
