#include "athena/evaluation.hpp"
#include "athena/knowledge_base.hpp"
#include "athena/mock_providers.hpp"
#include "athena/retrieval.hpp"
#include "test_support.hpp"

#include "doctest.h"
#include "json.hpp"

#include <cstdlib>
#include <sstream>
#include <string>
#include <sys/wait.h>

using testsupport::TempDir;
using testsupport::read_file;
using testsupport::write_file;
using nlohmann::json;

namespace {

struct CliResult {
    int exit_code;
    std::string out;
    std::string err;
};

CliResult run_cli(const TempDir& dir, const std::string& args) {
    static int counter = 0;
    const std::string out_path = dir.file("stdout-" + std::to_string(counter) + ".txt");
    const std::string err_path = dir.file("stderr-" + std::to_string(counter) + ".txt");
    ++counter;
    const std::string command = std::string(ATHENA_CLI_PATH) + " " + args + " >" +
                                out_path + " 2>" + err_path;
    int status = std::system(command.c_str());
    CliResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = read_file(out_path);
    result.err = read_file(err_path);
    return result;
}

std::string labels_fixture(const TempDir& dir) {
    const std::string path = dir.file("labels.txt");
    write_file(path, "盗窃\n放火\n抢劫\n诈骗\n");
    return path;
}

std::string dataset_fixture(const TempDir& dir) {
    const std::string path = dir.file("cases.jsonl");
    std::string content;
    const std::vector<std::string> labels = {"盗窃", "放火", "抢劫", "诈骗"};
    for (int i = 0; i < 12; ++i) {
        const std::string& label = labels[i % labels.size()];
        content += "{\"id\":\"c" + std::to_string(i) + "\",\"fact\":\"某日被告人实施" +
                   label + "行为编号" + std::to_string(i) +
                   "\",\"labels\":[\"" + label + "\"]}\n";
    }
    write_file(path, content);
    return path;
}

}  // namespace

TEST_CASE("build-kb from labels file, original mode") {
    TempDir dir;
    auto labels = labels_fixture(dir);
    auto result = run_cli(dir, "build-kb --mock --labels " + labels +
                                   " --mode original --out " + dir.file("kb.jsonl"));
    CHECK(result.exit_code == 0);
    CHECK(result.out.find("wrote 4 entries") != std::string::npos);
    CHECK(result.out.find("mode=original") != std::string::npos);

    auto kb = athena::load_kb(dir.file("kb.jsonl"));
    CHECK(kb.entries.size() == 4);
    CHECK(kb.provenance.built_at == "1970-01-01T00:00:00Z");
}

TEST_CASE("build-kb without --out is a usage error") {
    TempDir dir;
    auto labels = labels_fixture(dir);
    auto result = run_cli(dir, "build-kb --mock --labels " + labels);
    CHECK(result.exit_code == 2);
}

TEST_CASE("unknown subcommand and flags exit 2") {
    TempDir dir;
    CHECK(run_cli(dir, "no-such-command").exit_code == 2);
    CHECK(run_cli(dir, "retrieve --bogus-flag 1").exit_code == 2);
}

TEST_CASE("build-kb rewritten mock runs are byte-identical") {
    TempDir dir;
    auto dataset = dataset_fixture(dir);
    for (const char* name : {"kb1.jsonl", "kb2.jsonl"}) {
        auto result = run_cli(dir, "build-kb --mock --dataset " + dataset +
                                       " --format simple-jsonl --mode rewritten --out " +
                                       dir.file(name));
        REQUIRE(result.exit_code == 0);
    }
    CHECK(read_file(dir.file("kb1.jsonl")) == read_file(dir.file("kb2.jsonl")));
    CHECK(read_file(dir.file("kb1.jsonl")).find("rewritten") != std::string::npos);
}

TEST_CASE("retrieve prints ranked candidates as JSON") {
    TempDir dir;
    auto labels = labels_fixture(dir);
    run_cli(dir, "build-kb --mock --labels " + labels + " --mode original --out " +
                     dir.file("kb.jsonl"));
    auto result = run_cli(dir, "retrieve --mock --kb " + dir.file("kb.jsonl") +
                                   " --text 盗窃案件 --k 2");
    CHECK(result.exit_code == 0);
    json parsed = json::parse(result.out);
    REQUIRE(parsed.is_array());
    CHECK(parsed.size() == 2);
    CHECK(parsed[0]["rank"] == 1);
    CHECK(parsed[0].contains("score"));
}

TEST_CASE("predict with athena echoes the top-1 candidate") {
    TempDir dir;
    auto labels = labels_fixture(dir);
    run_cli(dir, "build-kb --mock --labels " + labels + " --mode original --out " +
                     dir.file("kb.jsonl"));
    write_file(dir.file("one.jsonl"),
               "{\"id\":\"x\",\"fact\":\"某日被告人盗窃财物\",\"labels\":[\"盗窃\"]}\n");

    auto result = run_cli(dir, "predict --mock --method athena --kb " +
                                   dir.file("kb.jsonl") + " --case " +
                                   dir.file("one.jsonl") + " --k 3 --verbose");
    CHECK(result.exit_code == 0);
    json parsed = json::parse(result.out);
    REQUIRE(parsed["retrieved"].is_array());
    CHECK(parsed["retrieved"].size() == 3);

    // recount: top-1 via the library over the same store and query
    auto kb = athena::load_kb(dir.file("kb.jsonl"));
    athena::MockEmbeddingProvider embedder(64);
    auto top = athena::retrieve_top_k(kb, embedder.embed_one("某日被告人盗窃财物"), 1);
    CHECK(parsed["predicted_label"].get<std::string>() == top.candidates[0].label);
    CHECK(parsed["parse_status"] == "exact");
    CHECK(parsed.contains("prompt"));
    CHECK(parsed.contains("raw_completion"));
}

TEST_CASE("predict reads the fact from stdin when no case is given") {
    TempDir dir;
    auto labels = labels_fixture(dir);
    run_cli(dir, "build-kb --mock --labels " + labels + " --mode original --out " +
                     dir.file("kb.jsonl"));
    write_file(dir.file("fact.txt"), "某日被告人放火烧毁他人房屋\n");
    auto result = run_cli(dir, "predict --mock --method athena --kb " +
                                   dir.file("kb.jsonl") + " --k 2 <" +
                                   dir.file("fact.txt"));
    CHECK(result.exit_code == 0);
    json parsed = json::parse(result.out);
    CHECK(parsed["case_id"] == "stdin");
    CHECK(parsed["retrieved"].size() == 2);
}

TEST_CASE("predict with baseline has an empty retrieved list") {
    TempDir dir;
    auto labels = labels_fixture(dir);
    write_file(dir.file("one.jsonl"),
               "{\"id\":\"x\",\"fact\":\"某日被告人盗窃财物\",\"labels\":[\"盗窃\"]}\n");
    auto result = run_cli(dir, "predict --mock --method baseline --labels " + labels +
                                   " --case " + dir.file("one.jsonl"));
    CHECK(result.exit_code == 0);
    json parsed = json::parse(result.out);
    CHECK(parsed["retrieved"].empty());
}

TEST_CASE("predict clamps k beyond the store size with a warning") {
    TempDir dir;
    auto labels = labels_fixture(dir);
    run_cli(dir, "build-kb --mock --labels " + labels + " --mode original --out " +
                     dir.file("kb.jsonl"));
    write_file(dir.file("one.jsonl"),
               "{\"id\":\"x\",\"fact\":\"某日被告人盗窃财物\",\"labels\":[\"盗窃\"]}\n");
    auto result = run_cli(dir, "predict --mock --method athena --kb " +
                                   dir.file("kb.jsonl") + " --case " +
                                   dir.file("one.jsonl") + " --k 99");
    CHECK(result.exit_code == 0);
    CHECK(result.err.find("clamped") != std::string::npos);
    json parsed = json::parse(result.out);
    CHECK(parsed["retrieved"].size() == 4);
}

TEST_CASE("evaluate writes records, report and per-class CSV") {
    TempDir dir;
    auto labels = labels_fixture(dir);
    auto dataset = dataset_fixture(dir);
    run_cli(dir, "build-kb --mock --labels " + labels + " --mode original --out " +
                     dir.file("kb.jsonl"));
    auto result = run_cli(dir, "evaluate --mock --method athena --dataset " + dataset +
                                   " --format simple-jsonl --kb " + dir.file("kb.jsonl") +
                                   " --k inf --out " + dir.file("run"));
    REQUIRE(result.exit_code == 0);
    CHECK(result.out.find("accuracy=") != std::string::npos);

    auto records = athena::read_record_log(dir.file("run") + "/records.jsonl");
    CHECK(records.size() == 12);
    json report = json::parse(read_file(dir.file("run") + "/report.json"));
    CHECK(report["n_cases"] == 12);
    CHECK(report["hit_rate"] == 1.0);  // all golds are in the store, k=inf
    CHECK(report["run_config"]["mock"] == true);
    std::string per_class = read_file(dir.file("run") + "/per_class.csv");
    CHECK(per_class.rfind("label,n,accuracy,hit_rate\n", 0) == 0);
    json run_config = json::parse(read_file(dir.file("run") + "/run_config.json"));
    CHECK(run_config["method"] == "athena");
}

TEST_CASE("evaluate with a non-athena method reports zero hit rate") {
    TempDir dir;
    auto dataset = dataset_fixture(dir);
    auto result = run_cli(dir, "evaluate --mock --method zero-shot-cot --dataset " +
                                   dataset + " --format simple-jsonl --out " +
                                   dir.file("run"));
    REQUIRE(result.exit_code == 0);
    json report = json::parse(read_file(dir.file("run") + "/report.json"));
    CHECK(report["hit_rate"] == 0.0);
    CHECK(report["run_config"]["method"] == "zero-shot-cot");
}

TEST_CASE("ablate emits one CSV row per k") {
    TempDir dir;
    auto labels = labels_fixture(dir);
    auto dataset = dataset_fixture(dir);
    run_cli(dir, "build-kb --mock --labels " + labels + " --mode original --out " +
                     dir.file("kb.jsonl"));
    auto result = run_cli(dir, "ablate --mock --dataset " + dataset +
                                   " --format simple-jsonl --kb " + dir.file("kb.jsonl") +
                                   " --ks 0,1,2,4,8,16,32,64 --out " + dir.file("abl"));
    REQUIRE(result.exit_code == 0);
    std::string csv = read_file(dir.file("abl") + "/ablation.csv");
    std::size_t lines = 0;
    for (char c : csv) {
        if (c == '\n') ++lines;
    }
    CHECK(lines == 9);  // header + 8 rows
    CHECK(csv.rfind("k,accuracy,hit_rate\n", 0) == 0);
    CHECK(std::filesystem::exists(dir.file("abl") + "/records_k0.jsonl"));
    CHECK(std::filesystem::exists(dir.file("abl") + "/report_k64.json"));
}

TEST_CASE("compare-rewrite on the same store yields identical curves") {
    TempDir dir;
    auto labels = labels_fixture(dir);
    auto dataset = dataset_fixture(dir);
    run_cli(dir, "build-kb --mock --labels " + labels + " --mode original --out " +
                     dir.file("kb.jsonl"));
    auto result = run_cli(dir, "compare-rewrite --mock --dataset " + dataset +
                                   " --format simple-jsonl --kb-original " +
                                   dir.file("kb.jsonl") + " --kb-rewritten " +
                                   dir.file("kb.jsonl") + " --ks 0,1,2,4 --out " +
                                   dir.file("cmp"));
    REQUIRE(result.exit_code == 0);
    std::string csv = read_file(dir.file("cmp") + "/rewrite_comparison.csv");
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "k,hit_rate_original,hit_rate_rewritten");
    while (std::getline(lines, line)) {
        auto first = line.find(',');
        auto second = line.find(',', first + 1);
        CHECK(line.substr(first + 1, second - first - 1) == line.substr(second + 1));
    }
}

TEST_CASE("runtime failures exit 1") {
    TempDir dir;
    auto result = run_cli(dir, "retrieve --mock --kb /nonexistent.jsonl --text x");
    CHECK(result.exit_code == 1);
    CHECK(result.err.find("error") != std::string::npos);
}
