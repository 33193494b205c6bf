#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>

#include "edgeface/container.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace edgeface;

namespace {

nlohmann::json manifest_of(const std::vector<uint8_t>& bytes) {
    uint64_t header_len = 0;
    for (int i = 0; i < 8; ++i) header_len |= static_cast<uint64_t>(bytes[8 + static_cast<size_t>(i)]) << (8 * i);
    return nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<long>(header_len));
}

}  // namespace

TEST_CASE("save/load/save round trip is byte-identical") {
    const EdgeFaceModel model = build(variant_spec(Variant::XXSmall), std::nullopt, 0);
    const std::vector<uint8_t> first = save_container(model);
    const EdgeFaceModel reloaded = load_container(first);
    const std::vector<uint8_t> second = save_container(reloaded);
    REQUIRE(first.size() == second.size());
    CHECK(std::memcmp(first.data(), second.data(), first.size()) == 0);

    CHECK(reloaded.seed == model.seed);
    CHECK(reloaded.spec.name == model.spec.name);
    CHECK_FALSE(reloaded.gamma.has_value());
}

TEST_CASE("low-rank models round trip with their rank ratio") {
    const EdgeFaceModel model = build(variant_spec(Variant::XXSmall), 0.6, 9);
    const std::vector<uint8_t> bytes = save_container(model);
    const EdgeFaceModel reloaded = load_container(bytes);
    REQUIRE(reloaded.gamma.has_value());
    CHECK(*reloaded.gamma == 0.6);
    const std::vector<uint8_t> again = save_container(reloaded);
    CHECK(bytes == again);
}

TEST_CASE("payload corruption is caught by the per-tensor checksum") {
    const EdgeFaceModel model = build(variant_spec(Variant::XXSmall), std::nullopt, 1);
    std::vector<uint8_t> bytes = save_container(model);
    bytes[bytes.size() - 5] ^= 0x40;  // flip one payload bit
    try {
        load_container(bytes);
        FAIL("corrupted container loaded");
    } catch (const ContainerException& e) {
        CHECK(e.code == ContainerError::ChecksumMismatch);
    }
}

TEST_CASE("header corruption maps to distinct error codes") {
    const EdgeFaceModel model = build(variant_spec(Variant::XXSmall), std::nullopt, 2);
    const std::vector<uint8_t> good = save_container(model);

    {
        std::vector<uint8_t> bad = good;
        bad[0] = 'X';
        try {
            load_container(bad);
            FAIL("bad magic accepted");
        } catch (const ContainerException& e) {
            CHECK(e.code == ContainerError::BadMagic);
        }
    }
    {
        std::vector<uint8_t> bad = good;
        bad[4] = 9;  // version
        try {
            load_container(bad);
            FAIL("unknown version accepted");
        } catch (const ContainerException& e) {
            CHECK(e.code == ContainerError::UnsupportedVersion);
        }
    }
    {
        std::vector<uint8_t> bad(good.begin(), good.begin() + 10);
        try {
            load_container(bad);
            FAIL("truncated prefix accepted");
        } catch (const ContainerException& e) {
            CHECK(e.code == ContainerError::Truncated);
        }
    }
    {
        std::vector<uint8_t> bad(good.begin(), good.end() - 100);  // cut payload
        try {
            load_container(bad);
            FAIL("truncated payload accepted");
        } catch (const ContainerException& e) {
            CHECK(e.code == ContainerError::Truncated);
        }
    }
}

TEST_CASE("manifest tampering trips shape validation") {
    const EdgeFaceModel model = build(variant_spec(Variant::XXSmall), std::nullopt, 3);
    std::vector<uint8_t> bytes = save_container(model);
    // rewrite the first tensor's shape in place: stem conv is (24,3,4,4)
    const std::string needle = "\"shape\":[24,3,4,4]";
    auto it = std::search(bytes.begin(), bytes.end(), needle.begin(), needle.end());
    REQUIRE(it != bytes.end());
    *(it + 9) = '4';  // 24 -> 44, same byte length
    try {
        load_container(bytes);
        FAIL("tampered shape accepted");
    } catch (const ContainerException& e) {
        CHECK(e.code == ContainerError::ShapeMismatch);
    }
}

TEST_CASE("manifest lists low-rank tensors whose census matches the sweep") {
    const EdgeFaceModel model = build(variant_spec(Variant::XSmall), 0.6, 4);
    const std::vector<uint8_t> bytes = save_container(model);
    const nlohmann::json manifest = manifest_of(bytes);

    CHECK(manifest.at("model").at("variant") == "X-SMALL");
    CHECK(manifest.at("model").at("gamma").get<double>() == 0.6);

    int64_t floats = 0;
    bool saw_w1 = false, saw_temp = false;
    for (const auto& t : manifest.at("tensors")) {
        floats += t.at("byte_len").get<int64_t>() / 4;
        const std::string name = t.at("name").get<std::string>();
        if (name == "stage2.block2.qkv.w1") saw_w1 = true;
        if (name == "stage2.block2.temperature") saw_temp = true;
    }
    CHECK(saw_w1);
    CHECK(saw_temp);
    CHECK(std::abs(static_cast<double>(floats) / 1e6 - 1.77) / 1.77 < 0.10);
}

TEST_CASE("tensor payload offsets are 64-byte aligned") {
    const EdgeFaceModel model = build(variant_spec(Variant::XXSmall), std::nullopt, 5);
    const nlohmann::json manifest = manifest_of(save_container(model));
    for (const auto& t : manifest.at("tensors")) CHECK(t.at("offset").get<uint64_t>() % 64 == 0);
}

TEST_CASE("loaded weights reproduce the saved model bit for bit") {
    const EdgeFaceModel model = build(variant_spec(Variant::XXSmall), 0.4, 6);
    const EdgeFaceModel loaded = load_container(save_container(model));
    std::vector<float> a, b;
    for_each_parameter(model, [&](const std::string&, const Tensor& t) {
        a.insert(a.end(), t.data.begin(), t.data.end());
    });
    for_each_parameter(loaded, [&](const std::string&, const Tensor& t) {
        b.insert(b.end(), t.data.begin(), t.data.end());
    });
    REQUIRE(a.size() == b.size());
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

TEST_CASE("crc32 reference values") {
    // IEEE 802.3 check value for "123456789"
    const char* s = "123456789";
    CHECK(crc32(reinterpret_cast<const uint8_t*>(s), 9) == 0xCBF43926u);
    CHECK(crc32(nullptr, 0) == 0x00000000u);
}
