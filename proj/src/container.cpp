#include "edgeface/container.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

namespace edgeface {

namespace {

constexpr char kMagic[4] = {'E', 'D', 'G', 'F'};
constexpr uint32_t kVersion = 1;
constexpr size_t kAlign = 64;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}
void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}
uint32_t get_u32(const uint8_t* p) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
    return v;
}
uint64_t get_u64(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
    return v;
}

size_t align_up(size_t n) { return (n + kAlign - 1) / kAlign * kAlign; }

}  // namespace

uint32_t crc32(const uint8_t* data, size_t len) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    uint32_t c = 0xFFFFFFFFu;
    for (size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xffu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

std::vector<uint8_t> save_container(const EdgeFaceModel& model) {
    // Payload first: tensors in canonical order, 64-byte aligned offsets.
    std::vector<uint8_t> payload;
    nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
    for_each_parameter(model, [&](const std::string& name, const Tensor& t) {
        const size_t offset = align_up(payload.size());
        payload.resize(offset, 0);
        const size_t byte_len = t.data.size() * sizeof(float);
        const size_t pos = payload.size();
        payload.resize(pos + byte_len);
        std::memcpy(payload.data() + pos, t.data.data(), byte_len);

        nlohmann::ordered_json entry;
        entry["name"] = name;
        entry["shape"] = t.shape;
        entry["dtype"] = "f32";
        entry["offset"] = offset;
        entry["byte_len"] = byte_len;
        entry["crc32"] = crc32(payload.data() + offset, byte_len);
        tensors.push_back(std::move(entry));
    });

    nlohmann::ordered_json manifest;
    manifest["model"]["variant"] = model.spec.name;
    if (model.gamma.has_value())
        manifest["model"]["gamma"] = *model.gamma;
    else
        manifest["model"]["gamma"] = nullptr;
    manifest["model"]["seed"] = model.seed;
    manifest["tensors"] = std::move(tensors);

    std::string header = manifest.dump();
    // Pad the header so the payload begins 64-byte aligned in the file.
    const size_t prefix = 4 + 4 + 8;
    while ((prefix + header.size()) % kAlign != 0) header.push_back(' ');

    std::vector<uint8_t> out;
    out.reserve(prefix + header.size() + payload.size());
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kVersion);
    put_u64(out, header.size());
    out.insert(out.end(), header.begin(), header.end());
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

EdgeFaceModel load_container(const std::vector<uint8_t>& bytes) {
    const size_t prefix = 4 + 4 + 8;
    if (bytes.size() < prefix) throw ContainerException(ContainerError::Truncated, "container: too short");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw ContainerException(ContainerError::BadMagic, "container: bad magic");
    const uint32_t version = get_u32(bytes.data() + 4);
    if (version != kVersion)
        throw ContainerException(ContainerError::UnsupportedVersion,
                                 "container: unsupported version " + std::to_string(version));
    const uint64_t header_len = get_u64(bytes.data() + 8);
    if (prefix + header_len > bytes.size())
        throw ContainerException(ContainerError::Truncated, "container: header extends past end");

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(bytes.begin() + static_cast<long>(prefix),
                                         bytes.begin() + static_cast<long>(prefix + header_len));
    } catch (const nlohmann::json::exception& e) {
        throw ContainerException(ContainerError::BadManifest,
                                 std::string("container: manifest parse failure: ") + e.what());
    }

    EdgeFaceModel model;
    try {
        const auto& mj = manifest.at("model");
        const std::string variant_name = mj.at("variant").get<std::string>();
        const auto variant = parse_variant(variant_name);
        if (!variant.has_value())
            throw ContainerException(ContainerError::BadManifest,
                                     "container: unknown variant '" + variant_name + "'");
        std::optional<double> gamma;
        if (!mj.at("gamma").is_null()) gamma = mj.at("gamma").get<double>();
        model = assemble(variant_spec(*variant), gamma);
        model.seed = mj.at("seed").get<uint64_t>();
    } catch (const ContainerException&) {
        throw;
    } catch (const std::exception& e) {
        throw ContainerException(ContainerError::BadManifest,
                                 std::string("container: bad model manifest: ") + e.what());
    }

    const auto& tensors = manifest.at("tensors");
    if (!tensors.is_array())
        throw ContainerException(ContainerError::BadManifest, "container: tensors must be an array");

    const size_t payload_base = prefix + header_len;
    const size_t payload_size = bytes.size() - payload_base;
    size_t cursor = 0;
    size_t index = 0;
    for_each_parameter(model, [&](const std::string& name, Tensor& t) {
        if (index >= tensors.size())
            throw ContainerException(ContainerError::ShapeMismatch,
                                     "container: missing tensor '" + name + "'");
        const auto& entry = tensors.at(index++);
        const std::string ename = entry.at("name").get<std::string>();
        if (ename != name)
            throw ContainerException(ContainerError::ShapeMismatch,
                                     "container: tensor order mismatch, expected '" + name + "', found '" +
                                         ename + "'");
        const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
        if (shape != t.shape)
            throw ContainerException(ContainerError::ShapeMismatch,
                                     "container: shape mismatch for '" + name + "' (" + shape_str(shape) +
                                         " vs " + shape_str(t.shape) + ")");
        if (entry.at("dtype").get<std::string>() != "f32")
            throw ContainerException(ContainerError::BadManifest,
                                     "container: unsupported dtype for '" + name + "'");
        const size_t offset = entry.at("offset").get<size_t>();
        const size_t byte_len = entry.at("byte_len").get<size_t>();
        if (offset % kAlign != 0)
            throw ContainerException(ContainerError::BadManifest,
                                     "container: unaligned offset for '" + name + "'");
        if (offset < cursor)
            throw ContainerException(ContainerError::BadManifest,
                                     "container: overlapping tensors at '" + name + "'");
        if (byte_len != t.data.size() * sizeof(float))
            throw ContainerException(ContainerError::ShapeMismatch,
                                     "container: byte length mismatch for '" + name + "'");
        if (offset + byte_len > payload_size)
            throw ContainerException(ContainerError::Truncated,
                                     "container: payload truncated at '" + name + "'");
        const uint32_t want = entry.at("crc32").get<uint32_t>();
        const uint32_t got = crc32(bytes.data() + payload_base + offset, byte_len);
        if (want != got)
            throw ContainerException(ContainerError::ChecksumMismatch,
                                     "container: checksum mismatch for '" + name + "'");
        std::memcpy(t.data.data(), bytes.data() + payload_base + offset, byte_len);
        cursor = offset + byte_len;
    });
    if (index != tensors.size())
        throw ContainerException(ContainerError::ShapeMismatch,
                                 "container: " + std::to_string(tensors.size() - index) +
                                     " unexpected extra tensors");
    return model;
}

void save_container_file(const EdgeFaceModel& model, const std::string& path) {
    const std::vector<uint8_t> bytes = save_container(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("container: cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("container: write failure on '" + path + "'");
}

EdgeFaceModel load_container_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("container: cannot open '" + path + "'");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return load_container(bytes);
}

}  // namespace edgeface
