#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "mhqa/checkpoint.hpp"
#include "mhqa/errors.hpp"
#include "mhqa/pipeline.hpp"

using namespace mhqa;
namespace fs = std::filesystem;

namespace {

PipelineConfig quick_config(const std::string& run, std::vector<std::pair<std::string, std::string>> extra = {}) {
    const auto out = fs::temp_directory_path() / ("mhqa_pipeline_" + run);
    fs::remove_all(out);
    std::vector<std::pair<std::string, std::string>> overrides = {
        {"output_dir", out.string()}, {"hidden", "3"},       {"abstract_hidden", "3"},
        {"bridge_epochs", "1"},       {"reader_epochs", "1"}, {"max_context_tokens", "200"}};
    overrides.insert(overrides.end(), extra.begin(), extra.end());
    return load_config(fs::path(MHQA_TEST_DATA_DIR) / "tiny_wiki" / "config.json", overrides);
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("stages refuse to run before their prerequisites") {
    Pipeline p(quick_config("prereq"));
    try {
        p.evaluate();
        FAIL("evaluate should need predictions");
    } catch (const PrerequisiteError& e) {
        CHECK(std::string(e.what()) == "predictions not found; run predict");
        CHECK(exit_code_for(e) == 2);
    }
    CHECK_THROWS_AS(p.train_bridge(), PrerequisiteError);
    CHECK(exit_code_for(ValidationError("x")) == 1);
    CHECK(exit_code_for(std::runtime_error("x")) == 3);
}

TEST_CASE("the full stage sequence runs end to end and keeps a consistent manifest") {
    Pipeline p(quick_config("full"));
    p.run_all();
    const fs::path out = p.output_dir();
    const auto manifest = read_json(out / "manifest.json");
    CHECK(manifest["effective_mode"] == "full");
    for (const auto& stage : Pipeline::stage_names()) {
        CAPTURE(stage);
        bool seen = false;
        for (const auto& [key, entry] : manifest["stages"].items()) {
            seen = seen || key == stage || key.starts_with(stage + ":");
        }
        CHECK(seen);
    }
    const auto metrics = read_json(out / "metrics_full.json");
    CHECK(metrics["mode"] == "full");
    CHECK(metrics["full"]["count"].get<int>() > 0);
    CHECK(check_fold_hygiene(out).empty());

    // Every file on disk is accounted for by exactly one manifest entry.
    std::map<std::string, int> owners;
    for (const auto& [stage, entry] : manifest["stages"].items()) {
        for (const auto& [file, sha] : entry["outputs"].items()) {
            owners[file] += 1;
        }
    }
    std::set<std::string> checkpoints;
    for (const auto& [name, entry] : manifest["checkpoints"].items()) {
        checkpoints.insert(name);
    }
    for (const auto& entry : fs::recursive_directory_iterator(out)) {
        if (!entry.is_regular_file()) {
            continue;
        }
        const auto rel = fs::relative(entry.path(), out);
        CAPTURE(rel.string());
        if (rel == "manifest.json") {
            continue;
        }
        if (*rel.begin() == "checkpoints") {
            CHECK(checkpoints.count(std::next(rel.begin())->string()) == 1);
        } else {
            CHECK(owners[rel.generic_string()] == 1);
        }
    }
    const auto predictions = load_predictions(out / "predictions_full.jsonl");
    CHECK(predictions.size() == p.dev_questions().size());
    fs::remove_all(out);
}

TEST_CASE("turning entity linking off records the no_el mode") {
    Pipeline p(quick_config("no_el", {{"entity_linking", "off"}}));
    p.ingest();
    const auto manifest = read_json(p.output_dir() / "manifest.json");
    CHECK(manifest["effective_mode"] == "no_el");
    CHECK(manifest["config"]["entity_linking"] == false);
    fs::remove_all(p.output_dir());
}

TEST_CASE("a tampered reader training file fails the fold hygiene check") {
    Pipeline p(quick_config("hygiene"));
    for (const auto* stage : {"ingest", "build-index", "derive-labels", "cross-predict", "train-reader"}) {
        p.run_stage(stage);
    }
    const fs::path out = p.output_dir();
    REQUIRE(check_fold_hygiene(out).empty());

    // Claim that a question was read with passages from the reasoner that
    // trained on it, and re-sign the file so only the fold check can object.
    auto manifest = read_json(out / "manifest.json");
    const auto fold0 = manifest["checkpoints"]["bridge_fold0"]["trained_on"].get<std::vector<std::string>>();
    REQUIRE_FALSE(fold0.empty());
    std::vector<std::string> lines;
    bool tampered = false;
    {
        std::ifstream in(out / "reader_train.jsonl");
        std::string line;
        while (std::getline(in, line)) {
            auto row = nlohmann::json::parse(line);
            if (!tampered && std::find(fold0.begin(), fold0.end(), row["qid"]) != fold0.end()) {
                row["reasoner"] = "bridge_fold0";
                tampered = true;
            }
            lines.push_back(row.dump());
        }
    }
    REQUIRE(tampered);
    {
        std::ofstream o(out / "reader_train.jsonl", std::ios::trunc);
        for (const auto& l : lines) {
            o << l << '\n';
        }
    }
    CHECK(check_fold_hygiene(out).size() == 2);  // hash mismatch plus the fold violation
    manifest["stages"]["train-reader:reader"]["outputs"]["reader_train.jsonl"] = sha256_file(out / "reader_train.jsonl");
    std::ofstream(out / "manifest.json", std::ios::trunc) << manifest.dump(2);
    const auto problems = check_fold_hygiene(out);
    REQUIRE(problems.size() == 1);
    CHECK(problems[0].find("which trained on it") != std::string::npos);
    fs::remove_all(out);
}
