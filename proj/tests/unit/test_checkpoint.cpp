#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "mhqa/checkpoint.hpp"
#include "mhqa/errors.hpp"
#include "mhqa/rng.hpp"

using namespace mhqa;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("mhqa_ckpt_" + name);
    fs::remove_all(dir);
    return dir;
}

nc::ParamStore sample_store() {
    nc::ParamStore store;
    Rng rng(21);
    store.add_xavier("b.weights", 3, 4, rng);
    store.add("a.bias", nc::Tensor::row({0.1, -2.5, 1e-3}));
    store.add("frozen", nc::Tensor(2, 2, 0.3), false);
    return store;
}

std::string read_all(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("sha256 of known inputs") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK_THROWS_AS(sha256_file(fresh_dir("nofile") / "missing.bin"), PrerequisiteError);
}

TEST_CASE("checkpoint roundtrip reproduces every tensor at float32 precision") {
    const auto dir = fresh_dir("roundtrip");
    const auto store = sample_store();
    save_checkpoint(store, dir, {{"note", "x"}});
    const auto loaded = load_checkpoint(dir);
    CHECK(loaded.meta["note"] == "x");
    REQUIRE(loaded.store.names() == store.names());
    for (const auto& [name, p] : store.items()) {
        const auto& q = loaded.store.get(name);
        CAPTURE(name);
        CHECK(q.value.shape() == p.value.shape());
        CHECK(q.trainable == p.trainable);
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            CHECK(q.value[i] == static_cast<double>(static_cast<float>(p.value[i])));
        }
    }
    // A second trip is exact: the values are already float32.
    const auto dir2 = fresh_dir("roundtrip2");
    save_checkpoint(loaded.store, dir2);
    const auto again = load_checkpoint(dir2);
    for (const auto& [name, p] : loaded.store.items()) {
        CHECK(again.store.get(name).value == p.value);
    }
    fs::remove_all(dir);
    fs::remove_all(dir2);
}

TEST_CASE("two saves of one store are byte-identical") {
    const auto a = fresh_dir("det_a"), b = fresh_dir("det_b");
    const auto store = sample_store();
    const auto ha = save_checkpoint(store, a);
    const auto hb = save_checkpoint(store, b);
    CHECK(ha == hb);
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        const auto name = entry.path().filename();
        CAPTURE(name.string());
        CHECK(read_all(entry.path()) == read_all(b / name));
        ++files;
    }
    CHECK(files == 4);  // three tensors and the manifest
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("damaged or missing checkpoints are reported") {
    CHECK_THROWS_AS(load_checkpoint(fresh_dir("absent")), PrerequisiteError);

    const auto dir = fresh_dir("damaged");
    save_checkpoint(sample_store(), dir);
    const auto file = dir / "b.weights.f32";
    REQUIRE(fs::exists(file));
    const auto bytes = read_all(file);

    fs::resize_file(file, bytes.size() - 3);
    CHECK_THROWS_AS(load_checkpoint(dir), CorruptionError);

    std::string flipped = bytes;
    flipped[5] = static_cast<char>(flipped[5] ^ 0x40);
    std::ofstream(file, std::ios::binary | std::ios::trunc) << flipped;
    CHECK_THROWS_AS(load_checkpoint(dir), CorruptionError);

    std::ofstream(file, std::ios::binary | std::ios::trunc) << bytes;
    CHECK_NOTHROW(load_checkpoint(dir));
    fs::remove_all(dir);
}
