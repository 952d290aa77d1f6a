#include "cta/sample.hpp"

namespace cta {

std::vector<double> rescale_times(const std::vector<double>& raw) {
    std::vector<double> out(raw.size(), 0.0);
    if (raw.empty()) return out;
    double lo = raw.front(), hi = raw.back();
    double span = hi - lo;
    if (span <= 0.0) return out;
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - lo) / span;
    return out;
}

}  // namespace cta
