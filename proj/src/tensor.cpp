#include "edgeface/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace edgeface {

int64_t Tensor::numel_of(const std::vector<int>& s) {
    int64_t n = 1;
    for (int e : s) {
        if (e <= 0) throw std::invalid_argument("tensor: non-positive extent " + std::to_string(e));
        n *= e;
    }
    return n;
}

Tensor Tensor::full(std::vector<int> s, float v) {
    Tensor t(std::move(s));
    for (float& x : t.data) x = v;
    return t;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

}  // namespace edgeface
