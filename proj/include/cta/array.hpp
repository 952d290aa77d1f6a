#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cta/errors.hpp"

namespace cta::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Dense float64 tensor, row-major. Rank 1 = vector, rank 2 = matrix
// (shape[0] rows, shape[1] cols); a numel-1 array acts as a scalar.
struct Array {
    Shape shape;
    std::vector<double> data;

    Array() = default;
    explicit Array(Shape s, double fill = 0.0);
    Array(Shape s, std::vector<double> values);

    static Array scalar(double v);

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    bool same_shape(const Array& o) const { return shape == o.shape; }
    bool all_finite() const;
};

}  // namespace cta::ad
