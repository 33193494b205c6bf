#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgeface/backbone.hpp"

namespace edgeface {

// Weight container layout:
//   "EDGF" | uint32 LE version=1 | uint64 LE header_len | JSON manifest | payload
// The manifest records {model: {variant, gamma, seed}, tensors: [...]} with one
// entry per parameter in canonical model order. Payload tensors are raw little-
// endian f32, each starting at a 64-byte-aligned offset, each with a CRC32 in
// the manifest. save(load(save(m))) is byte-identical.

enum class ContainerError {
    BadMagic,
    UnsupportedVersion,
    Truncated,
    BadManifest,
    ShapeMismatch,
    ChecksumMismatch,
};

struct ContainerException : std::runtime_error {
    ContainerError code;
    ContainerException(ContainerError c, const std::string& msg)
        : std::runtime_error(msg), code(c) {}
};

std::vector<uint8_t> save_container(const EdgeFaceModel& model);
EdgeFaceModel load_container(const std::vector<uint8_t>& bytes);

void save_container_file(const EdgeFaceModel& model, const std::string& path);
EdgeFaceModel load_container_file(const std::string& path);

uint32_t crc32(const uint8_t* data, size_t len);

}  // namespace edgeface
