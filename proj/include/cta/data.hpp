#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cta/sample.hpp"

namespace cta::data {

enum class Split { Train, Val, Test };

// A collection of samples plus the ground truth the model never sees.
// `truth_raw` keeps every ingested value in source units even after cells are
// hidden from the samples; `truth_model` is the same tensor in model units
// (identical until normalize() is applied).
struct Dataset {
    std::vector<TimeSeriesSample> samples;
    std::vector<ad::Array> truth_raw;
    std::vector<ad::Array> truth_model;
    std::vector<Split> split;
    std::vector<double> channel_mean, channel_std;
    bool normalized = false;

    std::size_t size() const { return samples.size(); }
    std::size_t channels() const { return samples.empty() ? 0 : samples[0].channels(); }
    std::vector<std::size_t> indices(Split s) const;
};

struct SyntheticConfig {
    std::size_t channels = 4;
    std::size_t length = 100;      // timestamps per sample
    std::size_t samples = 200;
    double irregularity = 0.3;     // 0 = regular grid; <1 keeps times increasing
    double noise = 0.05;           // additive gaussian, in value units
    double damping = 0.2;          // per-channel exponential decay factor
    double phase_jitter = 3.141592653589793;  // max random phase per sample
    std::uint64_t seed = 1;
};

// Damped, phase-shifted sinusoids on a jittered grid. Channel 0 with zero
// noise and zero phase jitter is exactly sin(2 pi t).
Dataset make_synthetic(const SyntheticConfig& cfg);

// CSV: one row per timestamp; first column is the timestamp, remaining
// columns are channels. An optional header row is detected and skipped; empty
// cells and "NaN" are missing values. Rows are grouped into samples of
// `window` timestamps (0 = one sample spanning the file); a shorter leftover
// group becomes a final sample. Ragged rows and non-increasing timestamps
// within a sample raise ParseError with the offending line number.
Dataset load_csv(const std::string& path, std::size_t window);

// Writes the model view of every sample (hidden cells as NaN), samples
// concatenated in order, full float64 round-trip precision.
void write_csv(const Dataset& ds, const std::string& path);

// Deterministic shuffle, then floor(train_frac*n) train and floor(val_frac*n)
// val samples; the rest is test.
void assign_splits(Dataset& ds, double train_frac, double val_frac, std::uint64_t seed);

// Hides floor(rate * visible) cells of every sample uniformly at random and
// marks them for evaluation. Ground truth is unaffected.
void apply_missing(Dataset& ds, double rate, std::uint64_t seed);

// Per-channel standardization with statistics from the visible cells of the
// train split. A channel with no spread (or no data) falls back to unit scale
// with a warning on stderr.
void normalize(Dataset& ds);

// Applies externally supplied statistics (e.g. from a checkpoint).
void apply_normalization(Dataset& ds, const std::vector<double>& mean,
                         const std::vector<double>& std_dev);

// Maps a {channels, n} matrix in model units back to source units.
ad::Array denormalize(const Dataset& ds, const ad::Array& m);

}  // namespace cta::data
