#include "athena/evaluation.hpp"

#include "athena/error.hpp"
#include "athena/text.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_set>

namespace athena {

namespace {

using nlohmann::json;

std::vector<std::string> run_universe(const Dataset& dataset, const KnowledgeBase* kb) {
    std::vector<std::string> universe = dataset.accusation_universe;
    if (kb) {
        std::unordered_set<std::string> seen(universe.begin(), universe.end());
        for (const auto& entry : kb->entries) {
            if (seen.insert(entry.label).second) universe.push_back(entry.label);
        }
    }
    return universe;
}

bool matches_any_gold(const std::string& predicted, const LegalCase& legal_case) {
    return std::find(legal_case.gold_labels.begin(), legal_case.gold_labels.end(),
                     predicted) != legal_case.gold_labels.end();
}

std::map<std::string, ClassStats> per_class_stats(
    const Dataset& dataset, const std::vector<EvaluationRecord>& records,
    bool all_golds) {
    struct Tally {
        std::size_t n = 0;
        std::size_t correct = 0;
        std::size_t hits = 0;
    };
    std::map<std::string, Tally> tallies;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& legal_case = dataset.cases[i];
        const auto& record = records[i];
        auto add = [&](const std::string& label) {
            auto& tally = tallies[label];
            tally.n += 1;
            tally.correct += static_cast<std::size_t>(record.correct);
            tally.hits += static_cast<std::size_t>(record.hit);
        };
        if (all_golds) {
            for (const auto& label : legal_case.gold_labels) add(label);
        } else {
            add(legal_case.first_label());
        }
    }
    std::map<std::string, ClassStats> out;
    for (const auto& [label, tally] : tallies) {
        ClassStats stats;
        stats.n = tally.n;
        stats.accuracy = static_cast<double>(tally.correct) / static_cast<double>(tally.n);
        stats.hit_rate = static_cast<double>(tally.hits) / static_cast<double>(tally.n);
        out[label] = stats;
    }
    return out;
}

json record_to_json(const EvaluationRecord& record, bool include_raw) {
    json line;
    line["case_id"] = record.case_id;
    line["method"] = to_string(record.method);
    line["k_used"] = record.k_used;
    line["retrieved_labels"] = record.retrieved_labels;
    line["hit"] = record.hit;
    if (record.predicted_label) {
        line["predicted_label"] = *record.predicted_label;
    } else {
        line["predicted_label"] = nullptr;
    }
    line["parse_status"] = to_string(record.parse_status);
    line["correct"] = record.correct;
    line["latency_ms"] = record.latency.count();
    if (include_raw) line["raw_completion"] = record.raw_completion;
    return line;
}

EvaluationRecord record_from_json(const json& line) {
    EvaluationRecord record;
    record.case_id = line.at("case_id").get<std::string>();
    record.method = prompt_method_from_string(line.at("method").get<std::string>());
    record.k_used = line.at("k_used").get<std::size_t>();
    record.retrieved_labels = line.at("retrieved_labels").get<std::vector<std::string>>();
    record.hit = line.at("hit").get<int>();
    if (!line.at("predicted_label").is_null()) {
        record.predicted_label = line.at("predicted_label").get<std::string>();
    }
    record.parse_status = parse_status_from_string(line.at("parse_status").get<std::string>());
    record.correct = line.at("correct").get<int>();
    record.latency = std::chrono::milliseconds(line.at("latency_ms").get<long>());
    if (line.contains("raw_completion")) {
        record.raw_completion = line["raw_completion"].get<std::string>();
    }
    return record;
}

std::string format_fraction(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", value);
    return buf;
}

void require_comparable(const KnowledgeBase& kb_original,
                        const KnowledgeBase& kb_rewritten,
                        const EmbeddingProvider& embedder) {
    if (kb_original.provenance.embed_model != kb_rewritten.provenance.embed_model) {
        throw Error(ErrorKind::Precondition,
                    "stores built by different embedders: " +
                        kb_original.provenance.embed_model + " vs " +
                        kb_rewritten.provenance.embed_model);
    }
    if (kb_original.provenance.embed_model != embedder.model_name()) {
        throw Error(ErrorKind::Precondition,
                    "query embedder " + embedder.model_name() +
                        " does not match stores built by " +
                        kb_original.provenance.embed_model);
    }
    if (kb_original.embedding_dimension != kb_rewritten.embedding_dimension) {
        throw Error(ErrorKind::DimensionMismatch, "stores have different dimensions");
    }
    std::set<std::string> lhs, rhs;
    for (const auto& e : kb_original.entries) lhs.insert(e.label);
    for (const auto& e : kb_rewritten.entries) rhs.insert(e.label);
    if (lhs != rhs) {
        throw Error(ErrorKind::Precondition, "stores cover different label universes");
    }
}

}  // namespace

std::vector<EmbeddingVector> CachingEmbeddingProvider::embed(
    const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<std::size_t> missing;
    std::vector<std::string> missing_texts;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (auto it = cache_.find(texts[i]); it != cache_.end()) {
                out[i] = it->second;
            } else {
                missing.push_back(i);
                missing_texts.push_back(texts[i]);
            }
        }
    }
    if (!missing.empty()) {
        auto fresh = inner_.embed(missing_texts);
        std::lock_guard<std::mutex> lock(mutex_);
        for (std::size_t j = 0; j < missing.size(); ++j) {
            cache_[missing_texts[j]] = fresh[j];
            out[missing[j]] = std::move(fresh[j]);
        }
    }
    return out;
}

std::size_t CachingEmbeddingProvider::cache_size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return cache_.size();
}

RunOutcome evaluate_run(const Dataset& dataset, PromptMethod method,
                        const KnowledgeBase* kb, ChatProvider& chat,
                        EmbeddingProvider* embedder, const PromptTemplates& templates,
                        const EvaluationOptions& options) {
    if (dataset.cases.empty()) {
        throw Error(ErrorKind::Precondition, "evaluation over an empty dataset");
    }
    if (method == PromptMethod::athena) {
        if (kb == nullptr) {
            throw Error(ErrorKind::Precondition, "athena evaluation requires a knowledge base");
        }
        if (embedder == nullptr) {
            throw Error(ErrorKind::Precondition, "athena evaluation requires an embedder");
        }
    }
    auto clock = options.clock ? options.clock
                               : [] { return std::chrono::steady_clock::now(); };
    const std::vector<std::string> universe =
        run_universe(dataset, method == PromptMethod::athena ? kb : nullptr);

    const std::size_t n = dataset.cases.size();
    std::vector<EvaluationRecord> records(n);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto eval_case = [&](std::size_t index) {
        const LegalCase& legal_case = dataset.cases[index];
        EvaluationRecord record;
        record.case_id = legal_case.id;
        record.method = method;
        const auto started = clock();
        try {
            RetrievalResult retrieved;
            const RetrievalResult* candidates = nullptr;
            if (method == PromptMethod::athena) {
                EmbeddingVector query = embedder->embed_one(legal_case.fact_text);
                retrieved = retrieve_top_k(*kb, query, options.k, legal_case.id);
                candidates = &retrieved;
                record.k_used = retrieved.candidates.size();
                for (const auto& c : retrieved.candidates) {
                    record.retrieved_labels.push_back(c.label);
                }
                record.hit = hit(retrieved, legal_case.gold_labels);
            }
            PromptBundle bundle =
                build_prompt(method, legal_case, candidates, universe, templates);
            ChatRequestInfo info{to_string(method), legal_case.id,
                                 bundle.candidates_used};
            std::string completion = chat.chat(bundle.turns, &info);
            ParsedJudgment judgment = parse_judgment(completion, universe);
            record.predicted_label = judgment.predicted_label;
            record.parse_status = judgment.parse_status;
            record.raw_completion = options.include_raw ? completion : "";
            record.correct = judgment.predicted_label &&
                                     matches_any_gold(*judgment.predicted_label, legal_case)
                                 ? 1
                                 : 0;
        } catch (...) {
            if (options.fail_fast) throw;
            record.parse_status = ParseStatus::failed;
            record.predicted_label.reset();
            record.correct = 0;
            try {
                std::rethrow_exception(std::current_exception());
            } catch (const std::exception& e) {
                record.raw_completion =
                    options.include_raw ? std::string("[provider-error] ") + e.what() : "";
            }
        }
        record.latency =
            std::chrono::duration_cast<std::chrono::milliseconds>(clock() - started);
        records[index] = std::move(record);
    };

    const int workers = std::max(1, std::min<int>(options.workers, static_cast<int>(n)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) eval_case(i);
    } else {
        auto work = [&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n || abort.load()) return;
                try {
                    eval_case(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!abort.exchange(true)) first_error = std::current_exception();
                    return;
                }
            }
        };
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    RunOutcome outcome;
    outcome.records = std::move(records);
    Report& report = outcome.report;
    report.run_config = options.config_info;
    report.n_cases = n;
    report.accuracy = accuracy(outcome.records);
    std::vector<int> hits;
    hits.reserve(n);
    std::size_t failures = 0;
    for (const auto& record : outcome.records) {
        hits.push_back(record.hit);
        if (record.parse_status == ParseStatus::failed) ++failures;
    }
    report.hit_rate = hit_rate(hits);
    report.per_class = per_class_stats(dataset, outcome.records, options.per_class_all_golds);
    report.average_accuracy = average_accuracy(report.per_class);
    if (options.reference_counts) {
        report.weighted_accuracy =
            weighted_accuracy(report.per_class, *options.reference_counts);
    }
    report.parse_failure_rate = static_cast<double>(failures) / static_cast<double>(n);
    return outcome;
}

double accuracy(const std::vector<EvaluationRecord>& records) {
    if (records.empty()) {
        throw Error(ErrorKind::Precondition, "accuracy over empty records");
    }
    double sum = 0.0;
    for (const auto& record : records) sum += record.correct;
    return sum / static_cast<double>(records.size());
}

double average_accuracy(const std::map<std::string, ClassStats>& per_class) {
    if (per_class.empty()) {
        throw Error(ErrorKind::Precondition, "average accuracy over empty class map");
    }
    double sum = 0.0;
    for (const auto& [label, stats] : per_class) sum += stats.accuracy;
    return sum / static_cast<double>(per_class.size());
}

double weighted_accuracy(const std::map<std::string, ClassStats>& per_class,
                         const std::map<std::string, std::uint64_t>& reference_counts) {
    if (per_class.empty()) {
        throw Error(ErrorKind::Precondition, "weighted accuracy over empty class map");
    }
    double numerator = 0.0;
    double denominator = 0.0;
    for (const auto& [label, stats] : per_class) {
        auto it = reference_counts.find(label);
        if (it == reference_counts.end() || it->second == 0) {
            throw Error(ErrorKind::Precondition,
                        "missing reference count for label: " + label);
        }
        numerator += stats.accuracy * static_cast<double>(it->second);
        denominator += static_cast<double>(it->second);
    }
    return numerator / denominator;
}

std::vector<AblationRow> ablate_k(
    const Dataset& dataset, const std::vector<std::size_t>& ks, const KnowledgeBase& kb,
    ChatProvider& chat, EmbeddingProvider& embedder, const PromptTemplates& templates,
    EvaluationOptions options,
    const std::function<void(std::size_t, const RunOutcome&)>& per_k_sink) {
    if (ks.empty()) {
        throw Error(ErrorKind::Precondition, "ablation requires at least one k");
    }
    CachingEmbeddingProvider cached(embedder);
    std::vector<AblationRow> rows;
    rows.reserve(ks.size());
    for (std::size_t k : ks) {
        options.k = k;
        options.config_info.k = k_to_string(k);
        RunOutcome outcome = evaluate_run(dataset, PromptMethod::athena, &kb, chat,
                                          &cached, templates, options);
        rows.push_back({k, outcome.report.accuracy, outcome.report.hit_rate});
        if (per_k_sink) per_k_sink(k, outcome);
    }
    return rows;
}

std::vector<double> hit_rate_curve(const Dataset& dataset, const KnowledgeBase& kb,
                                   const std::vector<std::size_t>& ks,
                                   EmbeddingProvider& embedder) {
    if (dataset.cases.empty()) {
        throw Error(ErrorKind::Precondition, "hit rate curve over an empty dataset");
    }
    std::vector<std::string> facts;
    facts.reserve(dataset.cases.size());
    for (const auto& legal_case : dataset.cases) facts.push_back(legal_case.fact_text);
    auto queries = embedder.embed(facts);

    std::vector<double> curve;
    curve.reserve(ks.size());
    for (std::size_t k : ks) {
        std::vector<int> hits;
        hits.reserve(dataset.cases.size());
        for (std::size_t i = 0; i < dataset.cases.size(); ++i) {
            auto result = retrieve_top_k(kb, queries[i], k, dataset.cases[i].id);
            hits.push_back(hit(result, dataset.cases[i].gold_labels));
        }
        curve.push_back(hit_rate(hits));
    }
    return curve;
}

std::vector<RewriteComparisonRow> compare_rewriting(const Dataset& dataset,
                                                    const KnowledgeBase& kb_original,
                                                    const KnowledgeBase& kb_rewritten,
                                                    const std::vector<std::size_t>& ks,
                                                    EmbeddingProvider& embedder) {
    if (ks.empty()) {
        throw Error(ErrorKind::Precondition, "comparison requires at least one k");
    }
    require_comparable(kb_original, kb_rewritten, embedder);
    CachingEmbeddingProvider cached(embedder);
    auto original_curve = hit_rate_curve(dataset, kb_original, ks, cached);
    auto rewritten_curve = hit_rate_curve(dataset, kb_rewritten, ks, cached);
    std::vector<RewriteComparisonRow> rows;
    rows.reserve(ks.size());
    for (std::size_t i = 0; i < ks.size(); ++i) {
        rows.push_back({ks[i], original_curve[i], rewritten_curve[i]});
    }
    return rows;
}

void write_record_log(const std::string& path,
                      const std::vector<EvaluationRecord>& records, bool include_raw) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot write record log: " + path);
    }
    for (const auto& record : records) {
        out << record_to_json(record, include_raw).dump() << "\n";
    }
    if (!out) {
        throw Error(ErrorKind::Io, "short write: " + path);
    }
}

std::vector<EvaluationRecord> read_record_log(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot read record log: " + path);
    }
    std::vector<EvaluationRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            records.push_back(record_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw Error(ErrorKind::CorruptFile,
                        path + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

std::string report_to_json(const Report& report) {
    json doc;
    doc["run_config"] = {{"chat_model", report.run_config.chat_model},
                         {"embed_model", report.run_config.embed_model},
                         {"method", report.run_config.method},
                         {"k", report.run_config.k},
                         {"kb_mode", report.run_config.kb_mode},
                         {"template_hash", report.run_config.template_hash},
                         {"seed", report.run_config.seed},
                         {"workers", report.run_config.workers},
                         {"mock", report.run_config.mock}};
    doc["n_cases"] = report.n_cases;
    doc["accuracy"] = report.accuracy;
    doc["hit_rate"] = report.hit_rate;
    doc["average_accuracy"] = report.average_accuracy;
    if (report.weighted_accuracy) {
        doc["weighted_accuracy"] = *report.weighted_accuracy;
    }
    doc["parse_failure_rate"] = report.parse_failure_rate;
    json classes = json::object();
    for (const auto& [label, stats] : report.per_class) {
        classes[label] = {{"n", stats.n},
                          {"accuracy", stats.accuracy},
                          {"hit_rate", stats.hit_rate}};
    }
    doc["per_class"] = std::move(classes);
    return doc.dump(2) + "\n";
}

void write_report_json(const std::string& path, const Report& report) {
    write_text_file(path, report_to_json(report));
}

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows) {
    std::ostringstream out;
    out << "k,accuracy,hit_rate\n";
    for (const auto& row : rows) {
        out << k_to_string(row.k) << "," << format_fraction(row.accuracy) << ","
            << format_fraction(row.hit_rate) << "\n";
    }
    write_text_file(path, out.str());
}

void write_per_class_csv(const std::string& path, const Report& report) {
    std::ostringstream out;
    out << "label,n,accuracy,hit_rate\n";
    for (const auto& [label, stats] : report.per_class) {
        out << label << "," << stats.n << "," << format_fraction(stats.accuracy) << ","
            << format_fraction(stats.hit_rate) << "\n";
    }
    write_text_file(path, out.str());
}

void write_rewrite_comparison_csv(const std::string& path,
                                  const std::vector<RewriteComparisonRow>& rows) {
    std::ostringstream out;
    out << "k,hit_rate_original,hit_rate_rewritten\n";
    for (const auto& row : rows) {
        out << k_to_string(row.k) << "," << format_fraction(row.hit_rate_original) << ","
            << format_fraction(row.hit_rate_rewritten) << "\n";
    }
    write_text_file(path, out.str());
}

std::map<std::string, std::uint64_t> read_reference_counts(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot read reference counts: " + path);
    }
    std::map<std::string, std::uint64_t> counts;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string trimmed = trim(line);
        if (trimmed.empty()) continue;
        auto comma = trimmed.rfind(',');
        if (comma == std::string::npos) {
            throw Error(ErrorKind::Parse, path + " line " + std::to_string(line_no) +
                                              ": expected `label,count`");
        }
        std::string label = trim(trimmed.substr(0, comma));
        std::string count_text = trim(trimmed.substr(comma + 1));
        if (line_no == 1 && label == "label" && count_text == "count") continue;
        try {
            std::size_t consumed = 0;
            long long value = std::stoll(count_text, &consumed);
            if (consumed != count_text.size() || value <= 0) throw std::invalid_argument("");
            counts[label] = static_cast<std::uint64_t>(value);
        } catch (const std::exception&) {
            throw Error(ErrorKind::Parse, path + " line " + std::to_string(line_no) +
                                              ": invalid count `" + count_text + "`");
        }
    }
    if (counts.empty()) {
        throw Error(ErrorKind::Parse, path + ": no counts");
    }
    return counts;
}

}  // namespace athena
