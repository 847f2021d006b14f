#include "mhqa/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "mhqa/errors.hpp"

namespace mhqa {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& known_modes() {
    static const std::vector<std::string> modes = {
        "full",        "no_el", "no_context_evidence", "no_content_evidence", "no_multitask", "no_bridge_reasoner",
        "oracle_gold_passage", "oracle_full_support"};
    return modes;
}

std::string PipelineConfig::effective_mode() const {
    if (mode == "full" && !entity_linking) {
        return "no_el";
    }
    return mode;
}

bool PipelineConfig::linking_enabled() const { return entity_linking && mode != "no_el"; }

namespace {

using Setter = std::function<void(PipelineConfig&, const json&)>;

template <typename T>
T expect(const std::string& key, const json& v) {
    try {
        if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) {
                throw ValidationError("config key '" + key + "' must be a string");
            }
            return v.get<std::string>();
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) {
                throw ValidationError("config key '" + key + "' must be true or false");
            }
            return v.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) {
                throw ValidationError("config key '" + key + "' must be an integer");
            }
            if (v.get<std::int64_t>() < 0) {
                throw ValidationError("config key '" + key + "' must be positive");
            }
            return v.get<T>();
        } else {
            if (!v.is_number()) {
                throw ValidationError("config key '" + key + "' must be a number");
            }
            return v.get<T>();
        }
    } catch (const json::exception& e) {
        throw ValidationError("config key '" + key + "': " + e.what());
    }
}

template <typename T>
Setter field(T PipelineConfig::*member, const char* key) {
    return [member, key](PipelineConfig& c, const json& v) { c.*member = expect<T>(key, v); };
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"corpus", field(&PipelineConfig::corpus, "corpus")},
        {"train_questions", field(&PipelineConfig::train_questions, "train_questions")},
        {"dev_questions", field(&PipelineConfig::dev_questions, "dev_questions")},
        {"embeddings", field(&PipelineConfig::embeddings, "embeddings")},
        {"output_dir", field(&PipelineConfig::output_dir, "output_dir")},
        {"k", field(&PipelineConfig::k, "k")},
        {"k1", field(&PipelineConfig::k1, "k1")},
        {"b", field(&PipelineConfig::b, "b")},
        {"lambda", field(&PipelineConfig::lambda, "lambda")},
        {"top_n_el", field(&PipelineConfig::top_n_el, "top_n_el")},
        {"entity_linking", field(&PipelineConfig::entity_linking, "entity_linking")},
        {"embed_dim", field(&PipelineConfig::embed_dim, "embed_dim")},
        {"hidden", field(&PipelineConfig::hidden, "hidden")},
        {"abstract_hidden", field(&PipelineConfig::abstract_hidden, "abstract_hidden")},
        {"lr", field(&PipelineConfig::lr, "lr")},
        {"bridge_epochs", field(&PipelineConfig::bridge_epochs, "bridge_epochs")},
        {"reader_epochs", field(&PipelineConfig::reader_epochs, "reader_epochs")},
        {"batch_size", field(&PipelineConfig::batch_size, "batch_size")},
        {"dropout", field(&PipelineConfig::dropout, "dropout")},
        {"aux_weight", field(&PipelineConfig::aux_weight, "aux_weight")},
        {"seed", field(&PipelineConfig::seed, "seed")},
        {"max_span_len", field(&PipelineConfig::max_span_len, "max_span_len")},
        {"max_context_tokens", field(&PipelineConfig::max_context_tokens, "max_context_tokens")},
        {"freeze_embeddings", field(&PipelineConfig::freeze_embeddings, "freeze_embeddings")},
        {"mode", field(&PipelineConfig::mode, "mode")},
    };
    return table;
}

bool is_path_key(const std::string& key) {
    return key == "corpus" || key == "train_questions" || key == "dev_questions" || key == "embeddings" ||
           key == "output_dir";
}

}  // namespace

void validate(const PipelineConfig& c) {
    auto positive = [](const char* key, double v) {
        if (!(v > 0.0)) {
            throw ValidationError("config key '" + std::string(key) + "' must be positive");
        }
    };
    positive("k", static_cast<double>(c.k));
    positive("k1", c.k1);
    positive("top_n_el", static_cast<double>(c.top_n_el));
    positive("embed_dim", static_cast<double>(c.embed_dim));
    positive("hidden", static_cast<double>(c.hidden));
    positive("abstract_hidden", static_cast<double>(c.abstract_hidden));
    positive("lr", c.lr);
    positive("bridge_epochs", static_cast<double>(c.bridge_epochs));
    positive("reader_epochs", static_cast<double>(c.reader_epochs));
    positive("batch_size", static_cast<double>(c.batch_size));
    positive("max_span_len", static_cast<double>(c.max_span_len));
    if (c.b < 0.0 || c.b > 1.0) {
        throw ValidationError("config key 'b' must lie in [0, 1]");
    }
    if (c.lambda < 0.0) {
        throw ValidationError("config key 'lambda' must be non-negative");
    }
    if (c.aux_weight < 0.0) {
        throw ValidationError("config key 'aux_weight' must be non-negative");
    }
    if (c.dropout < 0.0 || c.dropout >= 1.0) {
        throw ValidationError("config key 'dropout' must lie in [0, 1)");
    }
    if (std::find(known_modes().begin(), known_modes().end(), c.mode) == known_modes().end()) {
        throw ValidationError("unknown mode '" + c.mode + "'");
    }
}

json to_json(const PipelineConfig& c) {
    return {{"corpus", c.corpus},
            {"train_questions", c.train_questions},
            {"dev_questions", c.dev_questions},
            {"embeddings", c.embeddings},
            {"output_dir", c.output_dir},
            {"k", c.k},
            {"k1", c.k1},
            {"b", c.b},
            {"lambda", c.lambda},
            {"top_n_el", c.top_n_el},
            {"entity_linking", c.entity_linking},
            {"embed_dim", c.embed_dim},
            {"hidden", c.hidden},
            {"abstract_hidden", c.abstract_hidden},
            {"lr", c.lr},
            {"bridge_epochs", c.bridge_epochs},
            {"reader_epochs", c.reader_epochs},
            {"batch_size", c.batch_size},
            {"dropout", c.dropout},
            {"aux_weight", c.aux_weight},
            {"seed", c.seed},
            {"max_span_len", c.max_span_len},
            {"max_context_tokens", c.max_context_tokens},
            {"freeze_embeddings", c.freeze_embeddings},
            {"mode", c.mode}};
}

void apply_setting(PipelineConfig& config, const std::string& key, const json& value) {
    auto it = setters().find(key);
    if (it == setters().end()) {
        throw ValidationError("unknown config key '" + key + "'");
    }
    it->second(config, value);
}

void apply_override(PipelineConfig& config, const std::string& key, const std::string& text) {
    if (setters().count(key) == 0) {
        throw ValidationError("unknown config key '" + key + "'");
    }
    const json probe = to_json(config).at(key);
    json value;
    if (probe.is_string()) {
        value = text;
    } else if (probe.is_boolean()) {
        if (text == "true" || text == "on" || text == "1") {
            value = true;
        } else if (text == "false" || text == "off" || text == "0") {
            value = false;
        } else {
            throw ValidationError("config key '" + key + "' expects on/off, got '" + text + "'");
        }
    } else {
        try {
            value = json::parse(text);
        } catch (const json::exception&) {
            throw ValidationError("config key '" + key + "' expects a number, got '" + text + "'");
        }
    }
    apply_setting(config, key, value);
}

PipelineConfig load_config(const fs::path& path, const std::vector<std::pair<std::string, std::string>>& overrides) {
    PipelineConfig config;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) {
            throw PrerequisiteError("config file not found: " + path.string());
        }
        std::stringstream ss;
        ss << in.rdbuf();
        const std::string text = ss.str();
        if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
            json doc;
            try {
                doc = json::parse(text);
            } catch (const json::exception& e) {
                throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
            }
            if (!doc.is_object()) {
                throw ValidationError("config " + path.string() + " must be a JSON object");
            }
            const fs::path base = path.parent_path();
            for (const auto& [key, value] : doc.items()) {
                apply_setting(config, key, value);
                if (is_path_key(key) && value.is_string() && !value.get<std::string>().empty()) {
                    const fs::path p(value.get<std::string>());
                    if (p.is_relative()) {
                        apply_setting(config, key, (base / p).lexically_normal().string());
                    }
                }
            }
        }
    }
    for (const auto& [key, text] : overrides) {
        apply_override(config, key, text);
    }
    validate(config);
    return config;
}

}  // namespace mhqa
