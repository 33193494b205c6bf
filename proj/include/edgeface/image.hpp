#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edgeface/tensor.hpp"

namespace edgeface {

// Image ingestion: binary P6 PPM (maxval 255) mapped to [-1, 1] via
// v/127.5 - 1, or a raw file of 3*side*side little-endian f32 values.
// Both decode to a planar [3, side, side] tensor.
Tensor decode_ppm(const std::vector<uint8_t>& bytes, int side = 112);
Tensor decode_raw_f32(const std::vector<uint8_t>& bytes, int side = 112);

// Sniffs the format: "P6" header means PPM, anything else must be raw f32 of
// the exact expected size.
Tensor load_image_file(const std::string& path, int side = 112);

std::vector<uint8_t> encode_ppm(const Tensor& chw);  // inverse pixel mapping, for tooling
void write_f32_file(const std::string& path, const std::vector<float>& values);
std::vector<float> read_f32_file(const std::string& path);

}  // namespace edgeface
