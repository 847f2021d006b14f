#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace mhqa {

/// Ablation modes understood by predict and evaluate.
const std::vector<std::string>& known_modes();

struct PipelineConfig {
    std::string corpus;
    std::string train_questions;
    std::string dev_questions;
    std::string embeddings;  // optional
    std::string output_dir = "run";

    std::size_t k = 10;
    double k1 = 1.2;
    double b = 0.75;
    double lambda = 1.0;
    std::size_t top_n_el = 2;
    bool entity_linking = true;

    std::size_t embed_dim = 16;
    std::size_t hidden = 32;
    std::size_t abstract_hidden = 16;

    double lr = 0.005;
    std::size_t bridge_epochs = 60;
    std::size_t reader_epochs = 40;
    std::size_t batch_size = 4;
    double dropout = 0.3;
    double aux_weight = 1.0;
    std::uint64_t seed = 13;
    std::size_t max_span_len = 30;
    std::size_t max_context_tokens = 800;  // 0 = no cap
    bool freeze_embeddings = true;

    std::string mode = "full";

    /// The mode actually run: turning entity linking off turns "full" into
    /// "no_el", and "no_el" implies entity linking off.
    std::string effective_mode() const;
    bool linking_enabled() const;
};

/// Throws ValidationError describing the first invalid field.
void validate(const PipelineConfig& config);

nlohmann::json to_json(const PipelineConfig& config);

/// Applies one key=value pair; unknown keys and malformed values are
/// validation errors.
void apply_setting(PipelineConfig& config, const std::string& key, const nlohmann::json& value);
void apply_override(PipelineConfig& config, const std::string& key, const std::string& text);

/// Defaults, then the JSON file (if any), then overrides in order. Relative
/// paths in the file resolve against the file's directory. The result is
/// validated.
PipelineConfig load_config(const std::filesystem::path& path,
                           const std::vector<std::pair<std::string, std::string>>& overrides = {});

}  // namespace mhqa
