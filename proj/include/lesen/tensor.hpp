#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

namespace lesen {

// Dense row-major tensor of doubles, rank <= 4. Shapes are small
// (channels, height, width) so everything lives in one flat vector.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(count(shape), 0.0);
    }
    Tensor(std::vector<int> s, double fill) : shape(std::move(s)) {
        data.assign(count(shape), fill);
    }

    static std::size_t count(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) n *= static_cast<std::size_t>(d);
        return n;
    }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    // (c, y, x) indexing for rank-3 tensors
    double& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
    }
    double at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
    }
    // (y, x) indexing for rank-2 tensors
    double& at(int y, int x) { return data[static_cast<std::size_t>(y) * shape[1] + x]; }
    double at(int y, int x) const { return data[static_cast<std::size_t>(y) * shape[1] + x]; }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

inline bool all_finite(const Tensor& t) {
    for (double v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace lesen
