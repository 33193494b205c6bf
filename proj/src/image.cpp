#include "edgeface/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace edgeface {

namespace {

// Reads the next PPM header token, skipping whitespace and '#' comments.
std::string next_token(const std::vector<uint8_t>& b, size_t& pos) {
    while (pos < b.size()) {
        if (std::isspace(b[pos])) {
            ++pos;
        } else if (b[pos] == '#') {
            while (pos < b.size() && b[pos] != '\n') ++pos;
        } else {
            break;
        }
    }
    std::string tok;
    while (pos < b.size() && !std::isspace(b[pos])) tok.push_back(static_cast<char>(b[pos++]));
    return tok;
}

}  // namespace

Tensor decode_ppm(const std::vector<uint8_t>& bytes, int side) {
    size_t pos = 0;
    if (next_token(bytes, pos) != "P6") throw std::invalid_argument("ppm: not a binary P6 file");
    const std::string ws = next_token(bytes, pos);
    const std::string hs = next_token(bytes, pos);
    const std::string ms = next_token(bytes, pos);
    if (ws.empty() || hs.empty() || ms.empty()) throw std::invalid_argument("ppm: truncated header");
    const int w = std::stoi(ws), h = std::stoi(hs), maxval = std::stoi(ms);
    if (maxval != 255) throw std::invalid_argument("ppm: maxval must be 255, got " + std::to_string(maxval));
    if (w != side || h != side)
        throw std::invalid_argument("ppm: size " + std::to_string(w) + "x" + std::to_string(h) +
                                    " != required " + std::to_string(side) + "x" + std::to_string(side));
    ++pos;  // single whitespace after maxval
    const size_t need = static_cast<size_t>(w) * h * 3;
    if (bytes.size() - pos < need) throw std::invalid_argument("ppm: truncated pixel data");

    Tensor out({3, side, side});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                const uint8_t v = bytes[pos + (static_cast<size_t>(y) * w + x) * 3 + c];
                out.data[(static_cast<size_t>(c) * side + y) * side + x] = v / 127.5f - 1.0f;
            }
    return out;
}

Tensor decode_raw_f32(const std::vector<uint8_t>& bytes, int side) {
    const size_t need = 3ull * side * side * sizeof(float);
    if (bytes.size() != need)
        throw std::invalid_argument("raw image: size " + std::to_string(bytes.size()) + " != expected " +
                                    std::to_string(need) + " bytes");
    Tensor out({3, side, side});
    std::memcpy(out.data.data(), bytes.data(), need);
    return out;
}

Tensor load_image_file(const std::string& path, int side) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("image: cannot open '" + path + "'");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes, side);
    return decode_raw_f32(bytes, side);
}

std::vector<uint8_t> encode_ppm(const Tensor& chw) {
    if (chw.rank() != 3 || chw.dim(0) != 3) throw std::invalid_argument("encode_ppm: need [3,H,W] tensor");
    const int h = chw.dim(1), w = chw.dim(2);
    std::string header = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    std::vector<uint8_t> out(header.begin(), header.end());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                const float v = (chw.data[(static_cast<size_t>(c) * h + y) * w + x] + 1.0f) * 127.5f;
                out.push_back(static_cast<uint8_t>(std::clamp(std::lround(v), 0l, 255l)));
            }
    return out;
}

void write_f32_file(const std::string& path, const std::vector<float>& values) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("f32: cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
    if (!out) throw std::runtime_error("f32: write failure on '" + path + "'");
}

std::vector<float> read_f32_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("f32: cannot open '" + path + "'");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() % sizeof(float) != 0) throw std::runtime_error("f32: file size not a multiple of 4");
    std::vector<float> vals(bytes.size() / sizeof(float));
    std::memcpy(vals.data(), bytes.data(), bytes.size());
    return vals;
}

}  // namespace edgeface
