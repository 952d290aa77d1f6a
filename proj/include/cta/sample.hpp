#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cta/array.hpp"

namespace cta {

// Channel-major boolean grid over (channel, time) cells.
struct MaskGrid {
    std::size_t channels = 0, n_times = 0;
    std::vector<std::uint8_t> cells;

    MaskGrid() = default;
    MaskGrid(std::size_t c, std::size_t t, bool fill = false)
        : channels(c), n_times(t), cells(c * t, fill ? 1 : 0) {}

    bool get(std::size_t c, std::size_t i) const { return cells[c * n_times + i] != 0; }
    void set(std::size_t c, std::size_t i, bool v) { cells[c * n_times + i] = v ? 1 : 0; }
    std::size_t count() const {
        std::size_t n = 0;
        for (auto v : cells) n += v != 0;
        return n;
    }
    bool operator==(const MaskGrid& o) const = default;
};

// One multivariate series as the model sees it. `values` is {channels, n}
// with NaN wherever a cell is hidden from the model (never observed, held out
// for evaluation, or intentionally masked during a training step). Ground
// truth for held-out cells lives in the owning Dataset, not here.
struct TimeSeriesSample {
    std::vector<double> raw_times;       // as ingested
    std::vector<double> times;           // affinely rescaled to [0,1]
    ad::Array values;                    // {channels, n}, NaN = hidden
    MaskGrid observed;                   // O: present in the source data
    MaskGrid eval_mask;                  // held out for metric evaluation
    std::vector<double> channel_fill;    // constant fallback per fully-hidden channel

    std::size_t channels() const { return values.rows(); }
    std::size_t n_times() const { return times.size(); }
    bool visible(std::size_t c, std::size_t i) const { return !std::isnan(values.at(c, i)); }

    // Visibility as a grid (true where the model may read a value).
    MaskGrid visibility() const {
        MaskGrid g(channels(), n_times());
        for (std::size_t c = 0; c < channels(); ++c)
            for (std::size_t i = 0; i < n_times(); ++i) g.set(c, i, visible(c, i));
        return g;
    }
};

// Rescale raw timestamps affinely onto [0,1]. A single timestamp maps to 0.
std::vector<double> rescale_times(const std::vector<double>& raw);

}  // namespace cta
