// Stage-wise command-line driver for the multi-hop QA pipeline.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mhqa/errors.hpp"
#include "mhqa/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Bridge-reasoner multi-hop question answering pipeline"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<std::string> entity_linking;
    std::optional<std::size_t> k;
    std::optional<std::string> output;
    std::vector<std::string> sets;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON configuration file");
        cmd->add_option("--seed", seed, "random seed");
        cmd->add_option("--mode", mode, "ablation mode");
        cmd->add_option("--entity-linking", entity_linking, "on or off")->check(CLI::IsMember({"on", "off"}));
        cmd->add_option("--k", k, "start passages to retrieve");
        cmd->add_option("--output", output, "run directory");
        cmd->add_option("--set", sets, "extra key=value config overrides");
    };
    std::vector<std::string> stages = mhqa::Pipeline::stage_names();
    stages.push_back("all");
    for (const auto& s : stages) {
        add_common(app.add_subcommand(s, s == "all" ? "run every stage in order" : "run the " + s + " stage"));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    const std::string stage = app.get_subcommands().front()->get_name();

    try {
        std::vector<std::pair<std::string, std::string>> overrides;
        for (const auto& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                throw mhqa::ValidationError("--set expects key=value, got '" + kv + "'");
            }
            overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
        }
        // Dedicated flags win over --set.
        if (seed) {
            overrides.emplace_back("seed", std::to_string(*seed));
        }
        if (mode) {
            overrides.emplace_back("mode", *mode);
        }
        if (entity_linking) {
            overrides.emplace_back("entity_linking", *entity_linking);
        }
        if (k) {
            overrides.emplace_back("k", std::to_string(*k));
        }
        if (output) {
            overrides.emplace_back("output_dir", *output);
        }
        mhqa::Pipeline pipeline(mhqa::load_config(config_path, overrides));
        if (stage == "all") {
            pipeline.run_all();
        } else {
            pipeline.run_stage(stage);
        }
    } catch (const mhqa::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return mhqa::exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
