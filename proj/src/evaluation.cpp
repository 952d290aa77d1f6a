#include "cta/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "cta/errors.hpp"
#include "cta/spline.hpp"

namespace cta::eval {

using ad::Array;

namespace {

void accumulate_errors(const Array& pred, const Array& truth, const MaskGrid& mask,
                       double& abs_sum, double& sq_sum, std::size_t& count) {
    if (pred.shape != truth.shape)
        throw ShapeError("metric: prediction is " + ad::shape_str(pred.shape) + ", truth is " +
                         ad::shape_str(truth.shape));
    if (mask.channels != pred.rows() || mask.n_times != pred.cols())
        throw ShapeError("metric: mask does not match the matrices");
    for (std::size_t c = 0; c < mask.channels; ++c)
        for (std::size_t i = 0; i < mask.n_times; ++i) {
            if (!mask.get(c, i)) continue;
            const double tv = truth.at(c, i);
            if (std::isnan(tv))
                throw Error("metric: no ground truth at masked cell (channel " +
                            std::to_string(c) + ", time " + std::to_string(i) + ")");
            const double e = pred.at(c, i) - tv;
            abs_sum += std::abs(e);
            sq_sum += e * e;
            ++count;
        }
}

}  // namespace

double mae(const Array& pred, const Array& truth, const MaskGrid& mask) {
    double abs_sum = 0, sq_sum = 0;
    std::size_t count = 0;
    accumulate_errors(pred, truth, mask, abs_sum, sq_sum, count);
    if (count == 0) throw Error("metric: empty evaluation mask");
    return abs_sum / static_cast<double>(count);
}

double rmse(const Array& pred, const Array& truth, const MaskGrid& mask) {
    double abs_sum = 0, sq_sum = 0;
    std::size_t count = 0;
    accumulate_errors(pred, truth, mask, abs_sum, sq_sum, count);
    if (count == 0) throw Error("metric: empty evaluation mask");
    return std::sqrt(sq_sum / static_cast<double>(count));
}

Array baseline_spline(const TimeSeriesSample& s) {
    spline::ControlPath path = spline::build_control_path(s);
    Array out = s.values;
    for (std::size_t c = 0; c < s.channels(); ++c)
        for (std::size_t i = 0; i < s.n_times(); ++i)
            if (!s.visible(c, i)) out.at(c, i) = path.channels[c].value(s.times[i]);
    return out;
}

Array baseline_mean(const TimeSeriesSample& s, const std::vector<double>& channel_mean) {
    if (channel_mean.size() != s.channels())
        throw ShapeError("baseline_mean: need one mean per channel");
    Array out = s.values;
    for (std::size_t c = 0; c < s.channels(); ++c)
        for (std::size_t i = 0; i < s.n_times(); ++i)
            if (!s.visible(c, i)) out.at(c, i) = channel_mean[c];
    return out;
}

Method make_spline_method() {
    Method m;
    m.name = "spline";
    m.run = [](const data::Dataset& ds, const std::vector<std::size_t>& indices, std::uint64_t) {
        std::vector<Array> out;
        out.reserve(indices.size());
        for (std::size_t idx : indices) out.push_back(baseline_spline(ds.samples[idx]));
        return out;
    };
    return m;
}

Method make_mean_method() {
    Method m;
    m.name = "mean";
    m.run = [](const data::Dataset& ds, const std::vector<std::size_t>& indices, std::uint64_t) {
        // In model units the per-channel training mean is zero by
        // construction; fall back to zeros when stats are absent.
        std::vector<double> means(ds.channels(), 0.0);
        std::vector<Array> out;
        out.reserve(indices.size());
        for (std::size_t idx : indices) out.push_back(baseline_mean(ds.samples[idx], means));
        return out;
    };
    return m;
}

Method make_chain_method(const std::string& spec, model::ChainConfig base_cfg,
                         train::TrainConfig train_cfg) {
    Method m;
    m.name = spec;
    m.run = [spec, base_cfg, train_cfg](const data::Dataset& ds,
                                        const std::vector<std::size_t>& indices,
                                        std::uint64_t seed) {
        model::ChainConfig cfg = base_cfg;
        cfg.chain = model::parse_chain_spec(spec);
        cfg.channels = ds.channels();
        model::Chain chain = model::Chain::create(cfg, derive_seed(seed, 3));
        train::TrainConfig tc = train_cfg;
        tc.seed = derive_seed(seed, 4);
        train::train(chain, ds, tc);
        std::vector<Array> out;
        out.reserve(indices.size());
        for (std::size_t idx : indices)
            out.push_back(model::impute(chain, ds.samples[idx], 0));
        return out;
    };
    return m;
}

MetricReport run_benchmark(const data::Dataset& base, const std::vector<Method>& methods,
                           const std::vector<double>& rates, int trials, std::uint64_t seed) {
    if (base.normalized) throw Error("benchmark: pass the dataset in source units");
    if (base.split.size() != base.size())
        throw Error("benchmark: the dataset needs split assignments");
    if (methods.empty() || rates.empty() || trials < 1)
        throw ConfigError("benchmark: need at least one method, one rate, and one trial");

    MetricReport report;
    for (std::size_t ri = 0; ri < rates.size(); ++ri) {
        for (int trial = 0; trial < trials; ++trial) {
            const std::uint64_t cell_seed =
                derive_seed(seed, (ri + 1) * 1000 + static_cast<std::uint64_t>(trial));
            data::Dataset ds = base;
            data::apply_missing(ds, rates[ri], derive_seed(cell_seed, 2));
            data::normalize(ds);
            const std::vector<std::size_t> test_idx = ds.indices(data::Split::Test);
            if (test_idx.empty()) throw Error("benchmark: the dataset has no test samples");

            for (std::size_t mi = 0; mi < methods.size(); ++mi) {
                std::vector<Array> completed =
                    methods[mi].run(ds, test_idx, derive_seed(cell_seed, 10 + mi));
                if (completed.size() != test_idx.size())
                    throw Error("benchmark: method " + methods[mi].name + " returned " +
                                std::to_string(completed.size()) + " matrices for " +
                                std::to_string(test_idx.size()) + " samples");
                double abs_sum = 0, sq_sum = 0;
                std::size_t count = 0;
                for (std::size_t ti = 0; ti < test_idx.size(); ++ti) {
                    const std::size_t si = test_idx[ti];
                    Array in_source = data::denormalize(ds, completed[ti]);
                    accumulate_errors(in_source, ds.truth_raw[si], ds.samples[si].eval_mask,
                                      abs_sum, sq_sum, count);
                }
                if (count == 0)
                    throw Error("benchmark: no hidden test cells at rate " +
                                std::to_string(rates[ri]));
                TrialScore ts;
                ts.method = methods[mi].name;
                ts.rate = rates[ri];
                ts.trial = trial;
                ts.mae = abs_sum / static_cast<double>(count);
                ts.rmse = std::sqrt(sq_sum / static_cast<double>(count));
                report.trials.push_back(ts);
            }
        }
    }

    // Aggregate in (method, rate) order, methods outermost.
    for (const Method& m : methods) {
        for (double rate : rates) {
            std::vector<double> maes, rmses;
            for (const TrialScore& ts : report.trials)
                if (ts.method == m.name && ts.rate == rate) {
                    maes.push_back(ts.mae);
                    rmses.push_back(ts.rmse);
                }
            auto stats = [](const std::vector<double>& xs) {
                double mean = 0;
                for (double x : xs) mean += x;
                mean /= static_cast<double>(xs.size());
                double var = 0;
                if (xs.size() > 1) {
                    for (double x : xs) var += (x - mean) * (x - mean);
                    var /= static_cast<double>(xs.size() - 1);
                }
                return std::make_pair(mean, std::sqrt(var));
            };
            AggregateScore agg;
            agg.method = m.name;
            agg.rate = rate;
            agg.trials = static_cast<int>(maes.size());
            std::tie(agg.mae_mean, agg.mae_std) = stats(maes);
            std::tie(agg.rmse_mean, agg.rmse_std) = stats(rmses);
            report.aggregates.push_back(agg);
        }
    }

    std::ostringstream echo;
    echo << "# trials = " << trials << "\n# seed = " << seed << "\n# rates =";
    for (double r : rates) echo << ' ' << r;
    echo << "\n# methods =";
    for (const Method& m : methods) echo << ' ' << m.name;
    echo << "\n";
    report.config_echo = echo.str();
    return report;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

void write_report_csv(const MetricReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << report.config_echo;
    out << "method,rate,trials,mae_mean,mae_std,rmse_mean,rmse_std\n";
    for (const AggregateScore& a : report.aggregates)
        out << a.method << ',' << fmt(a.rate) << ',' << a.trials << ',' << fmt(a.mae_mean) << ','
            << fmt(a.mae_std) << ',' << fmt(a.rmse_mean) << ',' << fmt(a.rmse_std) << "\n";
}

void write_trials_csv(const MetricReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << report.config_echo;
    out << "method,rate,trial,mae,rmse\n";
    for (const TrialScore& t : report.trials)
        out << t.method << ',' << fmt(t.rate) << ',' << t.trial << ',' << fmt(t.mae) << ','
            << fmt(t.rmse) << "\n";
}

std::string format_report_text(const MetricReport& report) {
    std::vector<std::string> method_names;
    std::vector<double> rates;
    for (const AggregateScore& a : report.aggregates) {
        if (std::find(method_names.begin(), method_names.end(), a.method) == method_names.end())
            method_names.push_back(a.method);
        if (std::find(rates.begin(), rates.end(), a.rate) == rates.end())
            rates.push_back(a.rate);
    }
    auto lookup = [&](const std::string& m, double r) -> const AggregateScore* {
        for (const AggregateScore& a : report.aggregates)
            if (a.method == m && a.rate == r) return &a;
        return nullptr;
    };

    std::ostringstream out;
    out << report.config_echo;
    for (int metric = 0; metric < 2; ++metric) {
        out << (metric == 0 ? "MAE" : "RMSE") << " (mean +/- std over trials)\n";
        std::size_t w = 8;
        for (const std::string& m : method_names) w = std::max(w, m.size() + 2);
        out << std::string(w, ' ');
        for (double r : rates) {
            std::string head = "rate " + fmt(r);
            out << head << std::string(head.size() < 22 ? 22 - head.size() : 1, ' ');
        }
        out << "\n";
        for (const std::string& m : method_names) {
            out << m << std::string(w - m.size(), ' ');
            for (double r : rates) {
                const AggregateScore* a = lookup(m, r);
                std::string cell = "-";
                if (a) {
                    cell = metric == 0 ? fmt(a->mae_mean) + " +/- " + fmt(a->mae_std)
                                       : fmt(a->rmse_mean) + " +/- " + fmt(a->rmse_std);
                }
                out << cell << std::string(cell.size() < 22 ? 22 - cell.size() : 1, ' ');
            }
            out << "\n";
        }
        if (metric == 0) out << "\n";
    }
    return out.str();
}

void write_report_text(const MetricReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << format_report_text(report);
}

}  // namespace cta::eval
