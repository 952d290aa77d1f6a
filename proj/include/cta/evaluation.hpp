#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cta/data.hpp"
#include "cta/model.hpp"
#include "cta/training.hpp"

namespace cta::eval {

// Mean absolute / root-mean-square error over the masked cells. The mask must
// be nonempty and the truth must cover it.
double mae(const ad::Array& pred, const ad::Array& truth, const MaskGrid& mask);
double rmse(const ad::Array& pred, const ad::Array& truth, const MaskGrid& mask);

// Reference imputers, in whatever units the sample is in. Both leave visible
// cells untouched.
ad::Array baseline_spline(const TimeSeriesSample& s);  // per-channel cubic interpolant
ad::Array baseline_mean(const TimeSeriesSample& s, const std::vector<double>& channel_mean);

// One competitor in a benchmark: given the freshly masked and normalized
// dataset, prepare itself (train, if it needs to) and return a completed
// matrix in model units for every listed sample.
struct Method {
    std::string name;
    std::function<std::vector<ad::Array>(const data::Dataset& ds,
                                         const std::vector<std::size_t>& indices,
                                         std::uint64_t seed)>
        run;
};

Method make_spline_method();
Method make_mean_method();
// Trains a fresh chain of the given spec for every benchmark cell.
Method make_chain_method(const std::string& spec, model::ChainConfig base_cfg,
                         train::TrainConfig train_cfg);

struct TrialScore {
    std::string method;
    double rate = 0.0;
    int trial = 0;
    double mae = 0.0, rmse = 0.0;
};

struct AggregateScore {
    std::string method;
    double rate = 0.0;
    int trials = 0;
    double mae_mean = 0.0, mae_std = 0.0, rmse_mean = 0.0, rmse_std = 0.0;
};

struct MetricReport {
    std::vector<TrialScore> trials;
    std::vector<AggregateScore> aggregates;
    std::string config_echo;  // "# key = value" lines echoed into the reports
};

// For each (rate, trial): hides cells of a copy of `base` (which must carry
// split assignments and still be unnormalized), standardizes it, lets every
// method fill the test samples, and scores the hidden test cells in source
// units. Aggregates are mean and sample standard deviation over trials.
MetricReport run_benchmark(const data::Dataset& base, const std::vector<Method>& methods,
                           const std::vector<double>& rates, int trials, std::uint64_t seed);

void write_report_csv(const MetricReport& report, const std::string& path);
void write_trials_csv(const MetricReport& report, const std::string& path);
std::string format_report_text(const MetricReport& report);
void write_report_text(const MetricReport& report, const std::string& path);

}  // namespace cta::eval
