#include "cta/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "cta/errors.hpp"
#include "cta/rng.hpp"

namespace cta::data {

using ad::Array;
using ad::Shape;

namespace {
constexpr double kPi = 3.14159265358979323846;
const double kNaN = std::numeric_limits<double>::quiet_NaN();
}  // namespace

std::vector<std::size_t> Dataset::indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i)
        if (split[i] == s) out.push_back(i);
    return out;
}

Dataset make_synthetic(const SyntheticConfig& cfg) {
    if (cfg.channels == 0) throw ConfigError("synthetic data needs at least one channel");
    if (cfg.length < 2) throw ConfigError("synthetic data needs at least two timestamps");
    if (cfg.irregularity < 0.0 || cfg.irregularity >= 1.0)
        throw ConfigError("irregularity must lie in [0, 1)");

    Dataset ds;
    const std::size_t n = cfg.length, dx = cfg.channels;
    for (std::size_t b = 0; b < cfg.samples; ++b) {
        Rng rng(derive_seed(cfg.seed, b));
        const double phase = cfg.phase_jitter * rng.uniform(-1.0, 1.0);

        std::vector<double> times(n);
        for (std::size_t i = 0; i < n; ++i) {
            double jitter = 0.0;
            if (i > 0 && i + 1 < n && cfg.irregularity > 0.0)
                jitter = cfg.irregularity * rng.uniform(-0.45, 0.45);
            times[i] = (static_cast<double>(i) + jitter) / static_cast<double>(n - 1);
        }

        Array values(Shape{dx, n}, 0.0);
        for (std::size_t c = 0; c < dx; ++c)
            for (std::size_t i = 0; i < n; ++i) {
                const double t = times[i];
                double v = std::exp(-cfg.damping * static_cast<double>(c) * t) *
                           std::sin(2.0 * kPi * t + static_cast<double>(c) * kPi / 4.0 + phase);
                if (cfg.noise > 0.0) v += cfg.noise * rng.normal();
                values.at(c, i) = v;
            }

        TimeSeriesSample s;
        s.raw_times = times;
        s.times = rescale_times(times);
        s.values = values;
        s.observed = MaskGrid(dx, n, true);
        s.eval_mask = MaskGrid(dx, n, false);
        ds.samples.push_back(std::move(s));
        ds.truth_raw.push_back(values);
        ds.truth_model.push_back(std::move(values));
    }
    return ds;
}

namespace {

bool parse_double(const std::string& field, double& out) {
    const char* s = field.c_str();
    char* end = nullptr;
    out = std::strtod(s, &end);
    if (end == s) return false;
    while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
    return *end == '\0';
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

struct CsvRow {
    long line = 0;
    double time = 0.0;
    std::vector<double> vals;  // NaN = missing
};

}  // namespace

Dataset load_csv(const std::string& path, std::size_t window) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);

    std::vector<CsvRow> rows;
    std::string line;
    long lineno = 0;
    std::size_t n_fields = 0;
    bool saw_content = false;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;

        std::vector<std::string> fields;
        std::stringstream ss(t);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(trim(f));
        if (!t.empty() && t.back() == ',') fields.push_back("");

        if (!saw_content) {
            double probe;
            if (!fields.empty() && !parse_double(fields[0], probe)) continue;  // header row
            saw_content = true;
            n_fields = fields.size();
            if (n_fields < 2)
                throw ParseError(path + ":" + std::to_string(lineno) +
                                     ": need a timestamp and at least one channel",
                                 lineno);
        }
        if (fields.size() != n_fields)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                                 std::to_string(n_fields) + " fields, got " +
                                 std::to_string(fields.size()),
                             lineno);

        CsvRow row;
        row.line = lineno;
        if (!parse_double(fields[0], row.time))
            throw ParseError(path + ":" + std::to_string(lineno) + ": bad timestamp '" +
                                 fields[0] + "'",
                             lineno);
        for (std::size_t i = 1; i < fields.size(); ++i) {
            double v = kNaN;
            if (!fields[i].empty() && fields[i] != "NaN" && fields[i] != "nan") {
                if (!parse_double(fields[i], v))
                    throw ParseError(path + ":" + std::to_string(lineno) + ": bad value '" +
                                         fields[i] + "'",
                                     lineno);
            }
            row.vals.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(path + ": no data rows", lineno);

    const std::size_t dx = n_fields - 1;
    const std::size_t win = window == 0 ? rows.size() : window;

    Dataset ds;
    for (std::size_t start = 0; start < rows.size(); start += win) {
        const std::size_t n = std::min(win, rows.size() - start);
        TimeSeriesSample s;
        s.raw_times.resize(n);
        Array values(Shape{dx, n}, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const CsvRow& row = rows[start + i];
            if (i > 0 && row.time <= s.raw_times[i - 1])
                throw ParseError(path + ":" + std::to_string(row.line) +
                                     ": timestamps must increase within a sample",
                                 row.line);
            s.raw_times[i] = row.time;
            for (std::size_t c = 0; c < dx; ++c) values.at(c, i) = row.vals[c];
        }
        s.times = rescale_times(s.raw_times);
        s.values = values;
        s.observed = MaskGrid(dx, n);
        for (std::size_t c = 0; c < dx; ++c)
            for (std::size_t i = 0; i < n; ++i)
                s.observed.set(c, i, !std::isnan(values.at(c, i)));
        s.eval_mask = MaskGrid(dx, n, false);
        ds.samples.push_back(std::move(s));
        ds.truth_raw.push_back(values);
        ds.truth_model.push_back(std::move(values));
    }
    return ds;
}

void write_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    const std::size_t dx = ds.channels();
    out << "time";
    for (std::size_t c = 0; c < dx; ++c) out << ",ch" << c;
    out << "\n";
    char buf[64];
    for (const TimeSeriesSample& s : ds.samples) {
        for (std::size_t i = 0; i < s.n_times(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", s.raw_times[i]);
            out << buf;
            for (std::size_t c = 0; c < dx; ++c) {
                const double v = s.values.at(c, i);
                if (std::isnan(v)) {
                    out << ",NaN";
                } else {
                    std::snprintf(buf, sizeof buf, "%.17g", v);
                    out << ',' << buf;
                }
            }
            out << "\n";
        }
    }
}

void assign_splits(Dataset& ds, double train_frac, double val_frac, std::uint64_t seed) {
    if (train_frac < 0 || val_frac < 0 || train_frac + val_frac > 1.0)
        throw ConfigError("split fractions must be nonnegative and sum to at most 1");
    const std::size_t n = ds.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(seed, 0));
    for (std::size_t i = 0; i + 1 < n; ++i) {
        std::size_t j = i + rng.below(n - i);
        std::swap(order[i], order[j]);
    }
    const auto n_train = static_cast<std::size_t>(std::floor(train_frac * n));
    const auto n_val = static_cast<std::size_t>(std::floor(val_frac * n));
    ds.split.assign(n, Split::Test);
    for (std::size_t i = 0; i < n; ++i) {
        if (i < n_train)
            ds.split[order[i]] = Split::Train;
        else if (i < n_train + n_val)
            ds.split[order[i]] = Split::Val;
    }
}

void apply_missing(Dataset& ds, double rate, std::uint64_t seed) {
    if (rate < 0.0 || rate > 1.0) throw ConfigError("missing rate must lie in [0, 1]");
    for (std::size_t si = 0; si < ds.size(); ++si) {
        TimeSeriesSample& s = ds.samples[si];
        std::vector<std::pair<std::size_t, std::size_t>> cells;
        for (std::size_t c = 0; c < s.channels(); ++c)
            for (std::size_t i = 0; i < s.n_times(); ++i)
                if (s.visible(c, i)) cells.emplace_back(c, i);
        const auto k = static_cast<std::size_t>(std::floor(rate * cells.size()));
        Rng rng(derive_seed(seed, si));
        for (std::size_t i = 0; i < k; ++i) {
            std::size_t j = i + rng.below(cells.size() - i);
            std::swap(cells[i], cells[j]);
        }
        for (std::size_t i = 0; i < k; ++i) {
            auto [c, ti] = cells[i];
            s.values.at(c, ti) = kNaN;
            s.eval_mask.set(c, ti, true);
        }
    }
}

void apply_normalization(Dataset& ds, const std::vector<double>& mean,
                         const std::vector<double>& std_dev) {
    const std::size_t dx = ds.channels();
    if (mean.size() != dx || std_dev.size() != dx)
        throw ConfigError("normalization statistics must have one entry per channel");
    if (ds.normalized) throw Error("dataset is already normalized");
    for (double sd : std_dev)
        if (!(sd > 0.0)) throw ConfigError("normalization scale must be positive");

    for (std::size_t si = 0; si < ds.size(); ++si) {
        TimeSeriesSample& s = ds.samples[si];
        for (std::size_t c = 0; c < dx; ++c)
            for (std::size_t i = 0; i < s.n_times(); ++i) {
                double& v = s.values.at(c, i);
                if (!std::isnan(v)) v = (v - mean[c]) / std_dev[c];
                double& tm = ds.truth_model[si].at(c, i);
                if (!std::isnan(tm)) tm = (tm - mean[c]) / std_dev[c];
            }
        s.channel_fill.assign(dx, 0.0);  // normalized channel mean
    }
    ds.channel_mean = mean;
    ds.channel_std = std_dev;
    ds.normalized = true;
}

void normalize(Dataset& ds) {
    if (ds.split.size() != ds.size())
        throw Error("normalize needs split assignments (statistics come from the train split)");
    const std::size_t dx = ds.channels();
    std::vector<double> mean(dx, 0.0), std_dev(dx, 1.0);
    for (std::size_t c = 0; c < dx; ++c) {
        double sum = 0.0, sq = 0.0;
        std::size_t count = 0;
        for (std::size_t si = 0; si < ds.size(); ++si) {
            if (ds.split[si] != Split::Train) continue;
            const TimeSeriesSample& s = ds.samples[si];
            for (std::size_t i = 0; i < s.n_times(); ++i) {
                const double v = s.values.at(c, i);
                if (std::isnan(v)) continue;
                sum += v;
                sq += v * v;
                ++count;
            }
        }
        if (count == 0) {
            std::cerr << "warning: channel " << c
                      << " has no visible training data; using identity scale\n";
            continue;
        }
        mean[c] = sum / static_cast<double>(count);
        const double var = sq / static_cast<double>(count) - mean[c] * mean[c];
        if (var < 1e-12) {
            std::cerr << "warning: channel " << c << " is constant; using unit scale\n";
            std_dev[c] = 1.0;
        } else {
            std_dev[c] = std::sqrt(var);
        }
    }
    apply_normalization(ds, mean, std_dev);
}

Array denormalize(const Dataset& ds, const Array& m) {
    if (!ds.normalized) return m;
    Array out = m;
    const std::size_t dx = out.rows();
    if (dx != ds.channel_mean.size())
        throw ShapeError("denormalize: matrix has " + std::to_string(dx) +
                         " rows, dataset has " + std::to_string(ds.channel_mean.size()) +
                         " channels");
    for (std::size_t c = 0; c < dx; ++c)
        for (std::size_t i = 0; i < out.cols(); ++i) {
            double& v = out.at(c, i);
            if (!std::isnan(v)) v = v * ds.channel_std[c] + ds.channel_mean[c];
        }
    return out;
}

}  // namespace cta::data
