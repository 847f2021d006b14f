#include "mhqa/checkpoint.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "mhqa/errors.hpp"

namespace mhqa {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
        throw Error("sha256 computation failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

namespace {

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw PrerequisiteError("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_bytes(const fs::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error("cannot write " + path.string());
    }
}

std::string encode_f32(const nc::Tensor& t) {
    std::string bytes(t.size() * 4, '\0');
    for (std::size_t i = 0; i < t.size(); ++i) {
        auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(t[i]));
        for (int b = 0; b < 4; ++b) {
            bytes[4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
        }
    }
    return bytes;
}

nc::Tensor decode_f32(std::string_view bytes, std::size_t rows, std::size_t cols) {
    nc::Tensor t(rows, cols);
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
            bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + b])) << (8 * b);
        }
        t[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    return t;
}

}  // namespace

std::string sha256_file(const fs::path& path) { return sha256_hex(read_bytes(path)); }

std::string save_checkpoint(const nc::ParamStore& store, const fs::path& dir, const nlohmann::json& meta) {
    fs::create_directories(dir);
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& [name, param] : store.items()) {
        const std::string file = name + ".f32";
        const std::string bytes = encode_f32(param.value);
        write_bytes(dir / file, bytes);
        tensors.push_back({{"name", name},
                           {"shape", {param.value.rows(), param.value.cols()}},
                           {"dtype", "f32"},
                           {"file", file},
                           {"sha256", sha256_hex(bytes)},
                           {"trainable", param.trainable}});
    }
    const nlohmann::json manifest = {{"format", "mhqa-checkpoint-1"}, {"tensors", tensors}, {"meta", meta}};
    const std::string text = manifest.dump(2) + "\n";
    write_bytes(dir / "manifest.json", text);
    return sha256_hex(text);
}

LoadedCheckpoint load_checkpoint(const fs::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path)) {
        throw PrerequisiteError("checkpoint not found at " + dir.string());
    }
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_bytes(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw CorruptionError("checkpoint manifest " + manifest_path.string() + " is not valid JSON: " + e.what());
    }
    LoadedCheckpoint out;
    try {
        for (const auto& t : manifest.at("tensors")) {
            const std::string name = t.at("name");
            const std::size_t rows = t.at("shape").at(0), cols = t.at("shape").at(1);
            const fs::path file = dir / t.at("file").get<std::string>();
            if (!fs::exists(file)) {
                throw CorruptionError("checkpoint tensor file missing: " + file.string());
            }
            const std::string bytes = read_bytes(file);
            if (bytes.size() != rows * cols * 4) {
                throw CorruptionError("checkpoint tensor '" + name + "' has " + std::to_string(bytes.size()) +
                                      " bytes, expected " + std::to_string(rows * cols * 4));
            }
            if (sha256_hex(bytes) != t.at("sha256").get<std::string>()) {
                throw CorruptionError("checkpoint tensor '" + name + "' fails its hash check");
            }
            out.store.add(name, decode_f32(bytes, rows, cols), t.value("trainable", true));
        }
        out.meta = manifest.value("meta", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw CorruptionError("checkpoint manifest " + manifest_path.string() + " is malformed: " + e.what());
    }
    return out;
}

}  // namespace mhqa
