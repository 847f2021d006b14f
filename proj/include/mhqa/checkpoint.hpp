#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "mhqa/nc/param_store.hpp"

namespace mhqa {

std::string sha256_hex(std::string_view bytes);
/// Throws PrerequisiteError when the file cannot be read.
std::string sha256_file(const std::filesystem::path& path);

/// Writes every parameter as raw little-endian float32 plus a manifest.json
/// listing name, shape and SHA-256 per tensor. Returns the manifest's hash.
/// Identical stores produce byte-identical directories.
std::string save_checkpoint(const nc::ParamStore& store, const std::filesystem::path& dir,
                            const nlohmann::json& meta = nlohmann::json::object());

struct LoadedCheckpoint {
    nc::ParamStore store;
    nlohmann::json meta;
};

/// Throws PrerequisiteError for a missing checkpoint and CorruptionError when
/// a tensor file does not match its recorded size or hash.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace mhqa
