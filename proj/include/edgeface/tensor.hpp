#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace edgeface {

// Dense row-major float32 array with an explicit shape. Rank 2 is used for
// matrices / token batches, rank 4 for image-path data (N, C, H, W).
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(numel_of(shape)), 0.0f);
    }
    Tensor(std::vector<int> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {}

    static int64_t numel_of(const std::vector<int>& s);
    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    bool empty() const { return data.empty(); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }

    float& at2(int r, int c) { return data[static_cast<size_t>(r) * dim(1) + c]; }
    float at2(int r, int c) const { return data[static_cast<size_t>(r) * dim(1) + c]; }

    // NCHW addressing for rank-4 tensors.
    size_t idx4(int n, int c, int h, int w) const {
        return ((static_cast<size_t>(n) * dim(1) + c) * dim(2) + h) * dim(3) + w;
    }
    float& at4(int n, int c, int h, int w) { return data[idx4(n, c, h, w)]; }
    float at4(int n, int c, int h, int w) const { return data[idx4(n, c, h, w)]; }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, float v);

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

std::string shape_str(const std::vector<int>& shape);

}  // namespace edgeface
