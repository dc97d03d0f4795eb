#include "athena/config.hpp"
#include "athena/corpus.hpp"
#include "athena/error.hpp"
#include "athena/evaluation.hpp"
#include "athena/knowledge_base.hpp"
#include "athena/mock_providers.hpp"
#include "athena/prompting.hpp"
#include "athena/providers.hpp"
#include "athena/retrieval.hpp"
#include "athena/text.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kMockBuiltAt = "1970-01-01T00:00:00Z";

struct Providers {
    std::unique_ptr<athena::ChatProvider> chat;
    std::unique_ptr<athena::EmbeddingProvider> embed;
};

Providers make_providers(const athena::RunConfig& cfg) {
    Providers p;
    if (cfg.mock) {
        p.chat = std::make_unique<athena::MockChatProvider>();
        p.embed = std::make_unique<athena::MockEmbeddingProvider>(
            static_cast<std::size_t>(cfg.mock_dimension));
    } else {
        p.chat = std::make_unique<athena::HttpChatProvider>(cfg.chat_provider_config());
        p.embed =
            std::make_unique<athena::HttpEmbeddingProvider>(cfg.embed_provider_config());
    }
    return p;
}

athena::PromptTemplates load_templates(const athena::RunConfig& cfg) {
    if (cfg.templates_dir.empty()) return athena::PromptTemplates::builtin();
    return athena::PromptTemplates::load_dir(cfg.templates_dir);
}

athena::Dataset load_and_sample(const athena::RunConfig& cfg) {
    if (cfg.dataset.empty()) {
        throw athena::Error(athena::ErrorKind::Config, "no dataset configured");
    }
    athena::Dataset dataset = athena::load_dataset(
        cfg.dataset, athena::dataset_format_from_string(cfg.dataset_format));
    if (cfg.limit > 0) {
        dataset = athena::sample_head(dataset, cfg.limit);
    }
    if (cfg.balanced_cap > 0) {
        dataset = athena::sample_balanced(dataset, cfg.balanced_cap, cfg.seed);
    }
    return dataset;
}

athena::EvaluationOptions make_options(const athena::RunConfig& cfg,
                                       const athena::PromptTemplates& templates,
                                       const std::string& kb_mode) {
    athena::EvaluationOptions options;
    options.k = athena::k_from_string(cfg.k);
    options.workers = cfg.workers;
    options.fail_fast = cfg.fail_fast;
    options.include_raw = cfg.record_raw;
    if (cfg.mock) {
        // Frozen clock: latencies in mock logs are 0, keeping runs
        // byte-reproducible.
        options.clock = [] { return std::chrono::steady_clock::time_point{}; };
    }
    options.config_info.chat_model = cfg.mock ? "mock-chat" : cfg.chat_model;
    options.config_info.embed_model =
        cfg.mock ? "mock-ngram-" + std::to_string(cfg.mock_dimension) : cfg.embed_model;
    options.config_info.method = cfg.method;
    options.config_info.k = cfg.k;
    options.config_info.kb_mode = kb_mode;
    options.config_info.template_hash = templates.set_hash();
    options.config_info.seed = cfg.seed;
    options.config_info.workers = cfg.workers;
    options.config_info.mock = cfg.mock;
    if (!cfg.ref_counts.empty()) {
        options.reference_counts = athena::read_reference_counts(cfg.ref_counts);
    }
    return options;
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw athena::Error(athena::ErrorKind::Io,
                            "cannot create output dir " + dir + ": " + ec.message());
    }
}

void write_run_config(const athena::RunConfig& cfg, const std::string& dir) {
    athena::write_text_file((fs::path(dir) / "run_config.json").string(), cfg.to_json());
}

std::vector<std::string> read_label_file(const std::string& path) {
    std::string content = athena::read_text_file(path);
    std::vector<std::string> labels;
    std::string current;
    auto flush = [&] {
        std::string label = athena::normalize_label(current);
        current.clear();
        if (!label.empty()) labels.push_back(label);
    };
    for (char c : content) {
        if (c == '\n') {
            flush();
        } else {
            current.push_back(c);
        }
    }
    flush();
    if (labels.empty()) {
        throw athena::Error(athena::ErrorKind::Parse, "no labels in " + path);
    }
    return labels;
}

json candidates_to_json(const athena::RetrievalResult& result) {
    json out = json::array();
    for (std::size_t i = 0; i < result.candidates.size(); ++i) {
        const auto& c = result.candidates[i];
        out.push_back({{"rank", i + 1},
                       {"label", c.label},
                       {"score", c.score},
                       {"description", c.description},
                       {"example", c.example}});
    }
    return out;
}

void print_report_summary(const athena::Report& report) {
    std::cout << "method=" << report.run_config.method << " k=" << report.run_config.k
              << " n=" << report.n_cases << "\n";
    char line[256];
    std::snprintf(line, sizeof(line),
                  "accuracy=%.4f hit_rate=%.4f average_accuracy=%.4f "
                  "parse_failure_rate=%.4f",
                  report.accuracy, report.hit_rate, report.average_accuracy,
                  report.parse_failure_rate);
    std::cout << line;
    if (report.weighted_accuracy) {
        std::snprintf(line, sizeof(line), " weighted_accuracy=%.4f",
                      *report.weighted_accuracy);
        std::cout << line;
    }
    std::cout << "\n";
}

int cmd_build_kb(const athena::RunConfig& cfg, const std::string& out_path,
                 const std::string& resume_path) {
    std::vector<std::string> labels;
    if (!cfg.labels.empty()) {
        labels = read_label_file(cfg.labels);
    } else if (!cfg.dataset.empty()) {
        labels = athena::dedup_accusations(load_and_sample(cfg));
    } else {
        throw athena::Error(athena::ErrorKind::Config,
                            "build-kb needs --labels or --dataset");
    }

    auto templates = load_templates(cfg);
    auto providers = make_providers(cfg);
    athena::KbBuildOptions options;
    options.mode = athena::description_mode_from_string(cfg.mode);
    options.workers = cfg.workers;
    options.rewrite_template = templates.rewrite;
    options.chat_model = cfg.mock ? "mock-chat" : cfg.chat_model;
    options.resume_path = resume_path.empty() ? out_path + ".resume" : resume_path;
    if (cfg.mock) options.built_at = kMockBuiltAt;

    athena::KnowledgeBase kb = athena::build_knowledge_base(
        labels, options, providers.chat.get(), *providers.embed);
    athena::save_kb(kb, out_path);
    std::error_code ec;
    fs::remove(options.resume_path, ec);  // complete build, resume data is stale

    std::cout << "wrote " << kb.entries.size() << " entries to " << out_path << "\n"
              << "mode=" << athena::to_string(kb.provenance.mode)
              << " dimension=" << kb.embedding_dimension
              << " embed_model=" << kb.provenance.embed_model;
    if (!kb.provenance.chat_model.empty()) {
        std::cout << " chat_model=" << kb.provenance.chat_model;
    }
    std::cout << " built_at=" << kb.provenance.built_at << "\n";
    return 0;
}

int cmd_retrieve(const athena::RunConfig& cfg, const std::string& query_text) {
    if (cfg.kb.empty()) {
        throw athena::Error(athena::ErrorKind::Config, "retrieve needs --kb");
    }
    athena::KnowledgeBase kb = athena::load_kb(cfg.kb);
    auto providers = make_providers(cfg);
    std::string text = athena::trim(query_text);
    if (text.empty()) {
        throw athena::Error(athena::ErrorKind::Config, "empty query text");
    }
    auto query = providers.embed->embed_one(text);
    auto result = athena::retrieve_top_k(kb, query, athena::k_from_string(cfg.k));
    std::cout << candidates_to_json(result).dump(2) << "\n";
    return 0;
}

athena::LegalCase case_from_input(const athena::RunConfig& cfg,
                                  const std::string& case_path,
                                  const std::string& fact_flag) {
    if (!fact_flag.empty()) {
        athena::LegalCase legal_case;
        legal_case.id = "inline";
        legal_case.fact_text = athena::trim(fact_flag);
        legal_case.gold_labels = {"?"};  // unknown gold; prediction only
        return legal_case;
    }
    if (!case_path.empty()) {
        auto dataset = athena::load_dataset(
            case_path, athena::dataset_format_from_string(cfg.dataset_format));
        return dataset.cases.front();
    }
    // stdin: raw fact text
    std::string text((std::istreambuf_iterator<char>(std::cin)),
                     std::istreambuf_iterator<char>());
    athena::LegalCase legal_case;
    legal_case.id = "stdin";
    legal_case.fact_text = athena::trim(text);
    legal_case.gold_labels = {"?"};
    if (legal_case.fact_text.empty()) {
        throw athena::Error(athena::ErrorKind::Config, "empty fact text on stdin");
    }
    return legal_case;
}

int cmd_predict(const athena::RunConfig& cfg, const std::string& case_path,
                const std::string& fact_flag, bool verbose) {
    const athena::PromptMethod method = athena::prompt_method_from_string(cfg.method);
    athena::LegalCase legal_case = case_from_input(cfg, case_path, fact_flag);

    std::optional<athena::KnowledgeBase> kb;
    if (!cfg.kb.empty()) {
        kb = athena::load_kb(cfg.kb);
    }
    if (method == athena::PromptMethod::athena && !kb) {
        throw athena::Error(athena::ErrorKind::Config, "athena method needs --kb");
    }

    std::vector<std::string> universe;
    if (!cfg.labels.empty()) {
        universe = read_label_file(cfg.labels);
    } else if (kb) {
        universe = kb->labels();
    } else {
        throw athena::Error(athena::ErrorKind::Config,
                            "predict needs --labels or --kb for the answer space");
    }

    auto templates = load_templates(cfg);
    auto providers = make_providers(cfg);

    athena::RetrievalResult retrieved;
    const athena::RetrievalResult* candidates = nullptr;
    std::size_t k = athena::k_from_string(cfg.k);
    if (method == athena::PromptMethod::athena) {
        if (k != athena::k_all && k > kb->entries.size()) {
            std::cerr << "warning: k=" << k << " exceeds knowledge base size "
                      << kb->entries.size() << "; clamped\n";
            k = kb->entries.size();
        }
        auto query = providers.embed->embed_one(legal_case.fact_text);
        retrieved = athena::retrieve_top_k(*kb, query, k, legal_case.id);
        candidates = &retrieved;
    }

    athena::PromptBundle bundle =
        athena::build_prompt(method, legal_case, candidates, universe, templates);
    athena::ChatRequestInfo info{athena::to_string(method), legal_case.id,
                                 bundle.candidates_used};
    std::string completion = providers.chat->chat(bundle.turns, &info);
    athena::ParsedJudgment judgment = athena::parse_judgment(completion, universe);

    json out;
    out["case_id"] = legal_case.id;
    out["method"] = athena::to_string(method);
    out["k"] = athena::k_to_string(k);
    out["retrieved"] = candidates_to_json(retrieved);
    if (judgment.predicted_label) {
        out["predicted_label"] = *judgment.predicted_label;
    } else {
        out["predicted_label"] = nullptr;
    }
    out["parse_status"] = athena::to_string(judgment.parse_status);
    if (verbose) {
        json turns = json::array();
        for (const auto& turn : bundle.turns) {
            turns.push_back({{"role", athena::to_string(turn.role)},
                             {"content", turn.content}});
        }
        out["prompt"] = std::move(turns);
        out["raw_completion"] = completion;
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_evaluate(const athena::RunConfig& cfg) {
    athena::Dataset dataset = load_and_sample(cfg);
    const athena::PromptMethod method = athena::prompt_method_from_string(cfg.method);

    std::optional<athena::KnowledgeBase> kb;
    if (method == athena::PromptMethod::athena) {
        if (cfg.kb.empty()) {
            throw athena::Error(athena::ErrorKind::Config, "athena method needs --kb");
        }
        kb = athena::load_kb(cfg.kb);
    }

    auto templates = load_templates(cfg);
    auto providers = make_providers(cfg);
    auto options = make_options(
        cfg, templates, kb ? athena::to_string(kb->provenance.mode) : "");

    ensure_out_dir(cfg.out_dir);
    write_run_config(cfg, cfg.out_dir);
    athena::RunOutcome outcome = athena::evaluate_run(
        dataset, method, kb ? &*kb : nullptr, *providers.chat,
        providers.embed.get(), templates, options);

    athena::write_record_log((fs::path(cfg.out_dir) / "records.jsonl").string(),
                             outcome.records, cfg.record_raw);
    athena::write_report_json((fs::path(cfg.out_dir) / "report.json").string(),
                              outcome.report);
    athena::write_per_class_csv((fs::path(cfg.out_dir) / "per_class.csv").string(),
                                outcome.report);
    print_report_summary(outcome.report);
    return 0;
}

int cmd_ablate(const athena::RunConfig& cfg) {
    athena::Dataset dataset = load_and_sample(cfg);
    if (cfg.kb.empty()) {
        throw athena::Error(athena::ErrorKind::Config, "ablate needs --kb");
    }
    athena::KnowledgeBase kb = athena::load_kb(cfg.kb);
    auto templates = load_templates(cfg);
    auto providers = make_providers(cfg);
    auto options = make_options(cfg, templates, athena::to_string(kb.provenance.mode));
    options.config_info.method = "athena";
    auto ks = athena::parse_k_list(cfg.ks);

    ensure_out_dir(cfg.out_dir);
    write_run_config(cfg, cfg.out_dir);
    auto rows = athena::ablate_k(
        dataset, ks, kb, *providers.chat, *providers.embed, templates, options,
        [&](std::size_t k, const athena::RunOutcome& outcome) {
            const std::string suffix = "_k" + athena::k_to_string(k);
            athena::write_record_log(
                (fs::path(cfg.out_dir) / ("records" + suffix + ".jsonl")).string(),
                outcome.records, cfg.record_raw);
            athena::write_report_json(
                (fs::path(cfg.out_dir) / ("report" + suffix + ".json")).string(),
                outcome.report);
        });
    athena::write_ablation_csv((fs::path(cfg.out_dir) / "ablation.csv").string(), rows);

    std::cout << "k,accuracy,hit_rate\n";
    for (const auto& row : rows) {
        char line[128];
        std::snprintf(line, sizeof(line), "%s,%.4f,%.4f\n",
                      athena::k_to_string(row.k).c_str(), row.accuracy, row.hit_rate);
        std::cout << line;
    }
    return 0;
}

int cmd_compare_rewrite(const athena::RunConfig& cfg) {
    athena::Dataset dataset = load_and_sample(cfg);
    if (cfg.kb_original.empty() || cfg.kb_rewritten.empty()) {
        throw athena::Error(athena::ErrorKind::Config,
                            "compare-rewrite needs --kb-original and --kb-rewritten");
    }
    athena::KnowledgeBase kb_original = athena::load_kb(cfg.kb_original);
    athena::KnowledgeBase kb_rewritten = athena::load_kb(cfg.kb_rewritten);
    auto providers = make_providers(cfg);
    auto ks = athena::parse_k_list(cfg.ks);

    ensure_out_dir(cfg.out_dir);
    write_run_config(cfg, cfg.out_dir);
    auto rows = athena::compare_rewriting(dataset, kb_original, kb_rewritten, ks,
                                          *providers.embed);
    athena::write_rewrite_comparison_csv(
        (fs::path(cfg.out_dir) / "rewrite_comparison.csv").string(), rows);

    std::cout << "k,hit_rate_original,hit_rate_rewritten\n";
    for (const auto& row : rows) {
        char line[128];
        std::snprintf(line, sizeof(line), "%s,%.4f,%.4f\n",
                      athena::k_to_string(row.k).c_str(), row.hit_rate_original,
                      row.hit_rate_rewritten);
        std::cout << line;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Athena: retrieval-augmented legal judgment prediction"};
    app.require_subcommand(1);

    std::optional<std::string> flag_config, flag_out, flag_templates, flag_k,
        flag_method, flag_mode, flag_format, flag_dataset, flag_kb, flag_labels,
        flag_ks, flag_kb_original, flag_kb_rewritten, flag_ref_counts;
    std::optional<std::uint64_t> flag_seed, flag_limit, flag_balanced;
    std::optional<int> flag_workers;
    bool flag_mock = false;
    bool flag_fail_fast = false;

    app.add_option("--config", flag_config, "config file (key = value lines)");
    app.add_flag("--mock", flag_mock, "use offline mock providers");
    app.add_option("--workers", flag_workers, "concurrent provider lanes");
    app.add_option("--seed", flag_seed, "PRNG seed for sampling");
    app.add_option("--templates", flag_templates, "prompt template directory");
    app.add_flag("--fail-fast", flag_fail_fast, "abort the run on the first provider failure");

    auto add_dataset_flags = [&](CLI::App* cmd) {
        cmd->add_option("--dataset", flag_dataset, "dataset JSONL path");
        cmd->add_option("--format", flag_format, "cail-jsonl or simple-jsonl");
        cmd->add_option("--limit", flag_limit, "keep only the first N cases");
        cmd->add_option("--balanced", flag_balanced, "balanced sampling cap per label");
    };
    auto* build = app.add_subcommand("build-kb", "build the accusation knowledge base");
    build->fallthrough();
    std::string build_out;
    std::string build_resume;
    build->add_option("--out", build_out, "output KB file")->required();
    build->add_option("--labels", flag_labels, "label list file (one per line)");
    build->add_option("--mode", flag_mode, "original or rewritten");
    build->add_option("--resume", build_resume, "resume/prefill file");
    add_dataset_flags(build);

    auto* retrieve = app.add_subcommand("retrieve", "rank KB candidates for a query");
    retrieve->fallthrough();
    std::string retrieve_text;
    retrieve->add_option("--kb", flag_kb, "knowledge base file");
    retrieve->add_option("--text", retrieve_text, "query text")->required();
    retrieve->add_option("--k", flag_k, "top-k (number or `inf`)");

    auto* predict = app.add_subcommand("predict", "predict the accusation for one case");
    predict->fallthrough();
    std::string predict_case, predict_fact;
    bool predict_verbose = false;
    predict->add_option("--case", predict_case, "single-case JSONL file");
    predict->add_option("--fact", predict_fact, "raw fact text");
    predict->add_option("--kb", flag_kb, "knowledge base file");
    predict->add_option("--labels", flag_labels, "answer-space label file");
    predict->add_option("--method", flag_method, "baseline|zero-shot-cot|syllogism|athena");
    predict->add_option("--k", flag_k, "top-k (number or `inf`)");
    predict->add_option("--format", flag_format, "case file format");
    predict->add_flag("--verbose", predict_verbose, "print prompt and raw completion");

    auto* evaluate = app.add_subcommand("evaluate", "run and score a whole dataset");
    evaluate->fallthrough();
    evaluate->add_option("--kb", flag_kb, "knowledge base file");
    evaluate->add_option("--method", flag_method, "prompt method");
    evaluate->add_option("--k", flag_k, "top-k (number or `inf`)");
    evaluate->add_option("--ref-counts", flag_ref_counts, "label,count CSV for Eq. weighting");
    evaluate->add_option("--out", flag_out, "output directory");
    add_dataset_flags(evaluate);

    auto* ablate = app.add_subcommand("ablate", "sweep the in-context window size k");
    ablate->fallthrough();
    ablate->add_option("--kb", flag_kb, "knowledge base file");
    ablate->add_option("--ks", flag_ks, "comma-separated k grid");
    ablate->add_option("--out", flag_out, "output directory");
    add_dataset_flags(ablate);

    auto* compare = app.add_subcommand("compare-rewrite",
                                       "paired hit-rate curves for two stores");
    compare->fallthrough();
    compare->add_option("--kb-original", flag_kb_original, "original-description KB");
    compare->add_option("--kb-rewritten", flag_kb_rewritten, "rewritten-description KB");
    compare->add_option("--ks", flag_ks, "comma-separated k grid");
    compare->add_option("--out", flag_out, "output directory");
    add_dataset_flags(compare);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        athena::RunConfig cfg;
        if (flag_config) cfg.apply_file(*flag_config);
        cfg.apply_env();
        if (flag_mock) cfg.mock = true;
        if (flag_workers) cfg.workers = *flag_workers;
        if (flag_seed) cfg.seed = *flag_seed;
        if (flag_templates) cfg.templates_dir = *flag_templates;
        if (flag_out) cfg.out_dir = *flag_out;
        if (flag_dataset) cfg.dataset = *flag_dataset;
        if (flag_format) cfg.dataset_format = *flag_format;
        if (flag_limit) cfg.limit = *flag_limit;
        if (flag_balanced) cfg.balanced_cap = *flag_balanced;
        if (flag_kb) cfg.kb = *flag_kb;
        if (flag_labels) cfg.labels = *flag_labels;
        if (flag_method) cfg.method = *flag_method;
        if (flag_k) cfg.k = *flag_k;
        if (flag_mode) cfg.mode = *flag_mode;
        if (flag_ks) cfg.ks = *flag_ks;
        if (flag_kb_original) cfg.kb_original = *flag_kb_original;
        if (flag_kb_rewritten) cfg.kb_rewritten = *flag_kb_rewritten;
        if (flag_ref_counts) cfg.ref_counts = *flag_ref_counts;
        if (flag_fail_fast) cfg.fail_fast = true;
        cfg.validate();

        if (build->parsed()) return cmd_build_kb(cfg, build_out, build_resume);
        if (retrieve->parsed()) return cmd_retrieve(cfg, retrieve_text);
        if (predict->parsed()) return cmd_predict(cfg, predict_case, predict_fact,
                                                  predict_verbose);
        if (evaluate->parsed()) return cmd_evaluate(cfg);
        if (ablate->parsed()) return cmd_ablate(cfg);
        if (compare->parsed()) return cmd_compare_rewrite(cfg);
        std::cerr << "no subcommand\n";
        return 2;
    } catch (const athena::Error& e) {
        std::cerr << "error [" << athena::to_string(e.kind()) << "]: " << e.what()
                  << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
