#include "cta/array.hpp"

#include <cmath>

namespace cta::ad {

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "{";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "}";
}

Array::Array(Shape s, double fill) : shape(std::move(s)), data(shape_numel(shape), fill) {}

Array::Array(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
    if (shape_numel(shape) != data.size())
        throw ShapeError("array: " + std::to_string(data.size()) + " values do not fill shape " +
                         shape_str(shape));
}

Array Array::scalar(double v) { return Array(Shape{1}, std::vector<double>{v}); }

bool Array::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace cta::ad
