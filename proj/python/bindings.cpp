#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "cta/checkpoint.hpp"
#include "cta/config.hpp"
#include "cta/data.hpp"
#include "cta/errors.hpp"
#include "cta/evaluation.hpp"
#include "cta/model.hpp"
#include "cta/training.hpp"

namespace py = pybind11;
using namespace cta;

namespace {

using Rows = std::vector<std::vector<double>>;
using BoolRows = std::vector<std::vector<bool>>;

Rows to_rows(const ad::Array& a) {
    Rows out(a.rows(), std::vector<double>(a.cols()));
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) out[r][c] = a.at(r, c);
    return out;
}

ad::Array to_array(const Rows& rows) {
    if (rows.empty()) throw ShapeError("need at least one row");
    const std::size_t n = rows[0].size();
    ad::Array a({rows.size(), n}, 0.0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != n) throw ShapeError("rows must all have the same length");
        for (std::size_t c = 0; c < n; ++c) a.at(r, c) = rows[r][c];
    }
    return a;
}

MaskGrid to_mask(const BoolRows& rows) {
    if (rows.empty()) throw ShapeError("need at least one mask row");
    MaskGrid g(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size())
            throw ShapeError("mask rows must all have the same length");
        for (std::size_t c = 0; c < rows[r].size(); ++c) g.set(r, c, rows[r][c]);
    }
    return g;
}

BoolRows mask_rows(const MaskGrid& g) {
    BoolRows out(g.channels, std::vector<bool>(g.n_times));
    for (std::size_t c = 0; c < g.channels; ++c)
        for (std::size_t i = 0; i < g.n_times; ++i) out[c][i] = g.get(c, i);
    return out;
}

TimeSeriesSample make_sample(const std::vector<double>& times, const Rows& values) {
    if (times.size() < 1) throw ShapeError("need at least one timestamp");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (times[i] <= times[i - 1]) throw Error("timestamps must be strictly increasing");
    TimeSeriesSample s;
    s.raw_times = times;
    s.times = rescale_times(times);
    s.values = to_array(values);
    if (s.values.cols() != times.size())
        throw ShapeError("values need one column per timestamp");
    s.observed = MaskGrid(s.channels(), s.n_times());
    for (std::size_t c = 0; c < s.channels(); ++c)
        for (std::size_t i = 0; i < s.n_times(); ++i)
            s.observed.set(c, i, !std::isnan(s.values.at(c, i)));
    s.eval_mask = MaskGrid(s.channels(), s.n_times());
    s.channel_fill.assign(s.channels(), 0.0);
    return s;
}

data::Split split_from_str(const std::string& name) {
    if (name == "train") return data::Split::Train;
    if (name == "val") return data::Split::Val;
    if (name == "test") return data::Split::Test;
    throw ConfigError("split must be 'train', 'val', or 'test', got '" + name + "'");
}

// A chain plus the run configuration it was built from; the python-facing
// handle for training, imputing, and checkpointing.
struct PyModel {
    config::RunConfig cfg;
    std::size_t channels = 0;
    std::unique_ptr<model::Chain> chain;

    PyModel(config::RunConfig cfg_, std::size_t channels_) : cfg(std::move(cfg_)), channels(channels_) {
        if (channels == 0) throw ConfigError("channels must be positive");
        chain = std::make_unique<model::Chain>(
            model::Chain::create(config::chain_config(cfg, channels), derive_seed(cfg.seed, 3)));
    }

    static PyModel from_text(const std::string& config_text, std::size_t channels) {
        return PyModel(config::parse_config_text(config_text, "<config>"), channels);
    }

    py::dict train(const data::Dataset& ds) {
        train::TrainConfig tc = config::train_config(cfg);
        const train::TrainResult result = train::train(*chain, ds, tc);
        if (ds.normalized) {
            cfg.norm_mean = ds.channel_mean;
            cfg.norm_std = ds.channel_std;
        }
        py::list history;
        for (const train::HistoryRow& row : result.history) {
            py::dict h;
            h["iter"] = row.iter;
            h["total"] = row.loss.total;
            h["recon_tilde"] = row.loss.recon_tilde;
            h["recon_masked"] = row.loss.recon_masked;
            h["kld"] = row.loss.kld;
            h["val_mae"] = row.has_val ? py::object(py::float_(row.val_mae))
                                       : py::object(py::none());
            history.append(h);
        }
        py::dict out;
        out["best_val_mae"] = result.best_val_mae;
        out["best_iter"] = result.best_iter;
        out["iters_run"] = result.iters_run;
        out["history"] = history;
        return out;
    }

    Rows impute(const TimeSeriesSample& s) const { return to_rows(model::impute(*chain, s, 0)); }

    void save(const std::string& path) const {
        checkpoint::save_checkpoint(path, config::config_text(cfg), chain->store);
    }

    static PyModel load(const std::string& path) {
        const checkpoint::Checkpoint ck = checkpoint::load_checkpoint(path);
        config::RunConfig cfg = config::parse_config_text(ck.config_text, path);
        std::size_t channels = 0;
        for (const auto& [name, value] : ck.tensors)
            if (name == "layer0.head.fc2.b") channels = value.shape[0];
        if (channels == 0)
            throw Error(path + ": cannot infer the channel count (no layer0.head.fc2.b)");
        PyModel m(std::move(cfg), channels);
        checkpoint::apply_checkpoint(m.chain->store, ck);
        return m;
    }

    std::size_t n_params() const {
        std::size_t n = 0;
        for (std::size_t i = 0; i < chain->store.size(); ++i)
            n += chain->store[i].value.numel();
        return n;
    }
};

}  // namespace

PYBIND11_MODULE(_cta, m) {
    m.doc() = "continuous-time autoencoder imputation toolkit";

    // Translators run newest-first, so the base class goes in first and the
    // derived classes take precedence.
    py::register_exception<Error>(m, "CtaError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "CtaParseError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "CtaShapeError", PyExc_ValueError);

    py::class_<TimeSeriesSample>(m, "Sample")
        .def_readonly("raw_times", &TimeSeriesSample::raw_times)
        .def_readonly("times", &TimeSeriesSample::times)
        .def_property_readonly("values",
                               [](const TimeSeriesSample& s) { return to_rows(s.values); })
        .def_property_readonly("channels", &TimeSeriesSample::channels)
        .def_property_readonly("n_times", &TimeSeriesSample::n_times)
        .def("visibility", [](const TimeSeriesSample& s) { return mask_rows(s.visibility()); })
        .def("eval_mask", [](const TimeSeriesSample& s) { return mask_rows(s.eval_mask); });

    py::class_<data::Dataset>(m, "Dataset")
        .def_property_readonly("size", &data::Dataset::size)
        .def_property_readonly("channels", &data::Dataset::channels)
        .def_readonly("channel_mean", &data::Dataset::channel_mean)
        .def_readonly("channel_std", &data::Dataset::channel_std)
        .def_readonly("normalized", &data::Dataset::normalized)
        .def("sample", [](const data::Dataset& ds, std::size_t i) {
            if (i >= ds.size()) throw py::index_error();
            return ds.samples[i];
        })
        .def("truth_model", [](const data::Dataset& ds, std::size_t i) {
            if (i >= ds.size()) throw py::index_error();
            return to_rows(ds.truth_model[i]);
        })
        .def("truth_raw", [](const data::Dataset& ds, std::size_t i) {
            if (i >= ds.size()) throw py::index_error();
            return to_rows(ds.truth_raw[i]);
        })
        .def("indices", [](const data::Dataset& ds, const std::string& split) {
            return ds.indices(split_from_str(split));
        });

    m.def("make_sample", &make_sample, py::arg("times"), py::arg("values"),
          "Build a sample from timestamps and a channels x times value matrix (NaN = missing)");

    m.def(
        "make_synthetic",
        [](std::size_t channels, std::size_t length, std::size_t samples, double irregularity,
           double noise, double damping, double phase_jitter, std::uint64_t seed) {
            data::SyntheticConfig sc;
            sc.channels = channels;
            sc.length = length;
            sc.samples = samples;
            sc.irregularity = irregularity;
            sc.noise = noise;
            sc.damping = damping;
            sc.phase_jitter = phase_jitter;
            sc.seed = seed;
            return data::make_synthetic(sc);
        },
        py::arg("channels") = 4, py::arg("length") = 100, py::arg("samples") = 200,
        py::arg("irregularity") = 0.3, py::arg("noise") = 0.05, py::arg("damping") = 0.2,
        py::arg("phase_jitter") = 3.141592653589793, py::arg("seed") = 1,
        "Damped phase-shifted sinusoids on a jittered time grid");

    m.def("load_csv", &data::load_csv, py::arg("path"), py::arg("window") = 0);
    m.def("write_csv", &data::write_csv, py::arg("dataset"), py::arg("path"));
    m.def("assign_splits", &data::assign_splits, py::arg("dataset"), py::arg("train_frac"),
          py::arg("val_frac"), py::arg("seed"));
    m.def("apply_missing", &data::apply_missing, py::arg("dataset"), py::arg("rate"),
          py::arg("seed"), "Hide floor(rate * visible) cells per sample for evaluation");
    m.def("normalize", &data::normalize, py::arg("dataset"),
          "Per-channel z-score using train-split statistics");
    m.def("apply_normalization", &data::apply_normalization, py::arg("dataset"), py::arg("mean"),
          py::arg("std"));
    m.def("denormalize",
          [](const data::Dataset& ds, const Rows& rows) {
              return to_rows(data::denormalize(ds, to_array(rows)));
          },
          py::arg("dataset"), py::arg("matrix"));

    m.def("mae",
          [](const Rows& pred, const Rows& truth, const BoolRows& mask) {
              return eval::mae(to_array(pred), to_array(truth), to_mask(mask));
          },
          py::arg("pred"), py::arg("truth"), py::arg("mask"));
    m.def("rmse",
          [](const Rows& pred, const Rows& truth, const BoolRows& mask) {
              return eval::rmse(to_array(pred), to_array(truth), to_mask(mask));
          },
          py::arg("pred"), py::arg("truth"), py::arg("mask"));

    m.def("baseline_spline",
          [](const TimeSeriesSample& s) { return to_rows(eval::baseline_spline(s)); },
          py::arg("sample"), "Per-channel cubic interpolation of the visible cells");
    m.def("baseline_mean",
          [](const TimeSeriesSample& s, const std::vector<double>& channel_mean) {
              return to_rows(eval::baseline_mean(s, channel_mean));
          },
          py::arg("sample"), py::arg("channel_mean"));

    m.def("default_config", [] { return config::config_text(config::default_config()); },
          "Canonical key = value listing of every run option");

    py::class_<PyModel>(m, "Model")
        .def(py::init(&PyModel::from_text), py::arg("config_text"), py::arg("channels"))
        .def_property_readonly("config_text",
                               [](const PyModel& pm) { return config::config_text(pm.cfg); })
        .def_property_readonly("channels", [](const PyModel& pm) { return pm.channels; })
        .def_property_readonly("chain_spec",
                               [](const PyModel& pm) { return pm.cfg.model_chain; })
        .def_property_readonly("n_params", &PyModel::n_params)
        .def("train", &PyModel::train, py::arg("dataset"),
             "Minibatch training; returns best-validation summary and loss history")
        .def("impute", &PyModel::impute, py::arg("sample"),
             "Completed channels x times matrix (deterministic, noise-free)")
        .def("save", &PyModel::save, py::arg("path"));

    m.def("load_model", &PyModel::load, py::arg("path"));
}
