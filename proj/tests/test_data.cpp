#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "cta/data.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cta;
using ad::Array;
using ad::Shape;
using data::Dataset;
using data::Split;
using data::SyntheticConfig;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();
const double kPi = 3.14159265358979323846;

std::string temp_path(const std::string& name) {
    return std::string("/tmp/cta_data_test_") + name;
}

Dataset tiny_dataset() {
    // One sample, 2 channels x 5 timestamps, everything visible.
    Dataset ds;
    TimeSeriesSample s;
    s.raw_times = {0.0, 1.0, 2.0, 3.0, 4.0};
    s.times = rescale_times(s.raw_times);
    s.values = Array(Shape{2, 5}, {0.5, 1.5, 2.5, 3.5, 4.5, -1.0, -2.0, -3.0, -4.0, -5.0});
    s.observed = MaskGrid(2, 5, true);
    s.eval_mask = MaskGrid(2, 5, false);
    ds.samples.push_back(s);
    ds.truth_raw.push_back(s.values);
    ds.truth_model.push_back(s.values);
    return ds;
}

}  // namespace

TEST_CASE("synthetic channel 0 without noise or jitter is exactly sin(2 pi t)") {
    SyntheticConfig cfg;
    cfg.channels = 1;
    cfg.length = 5;
    cfg.samples = 1;
    cfg.irregularity = 0.0;
    cfg.noise = 0.0;
    cfg.phase_jitter = 0.0;
    Dataset ds = data::make_synthetic(cfg);
    REQUIRE(ds.size() == 1);
    const TimeSeriesSample& s = ds.samples[0];
    for (std::size_t i = 0; i < 5; ++i) {
        const double t = static_cast<double>(i) / 4.0;
        CHECK(s.times[i] == t);
        CHECK(testutil::close_abs(s.values.at(0, i), std::sin(2.0 * kPi * t), 1e-15));
    }
}

TEST_CASE("synthetic channels follow the damped phase-shifted closed form") {
    SyntheticConfig cfg;
    cfg.channels = 3;
    cfg.length = 9;
    cfg.samples = 1;
    cfg.irregularity = 0.0;
    cfg.noise = 0.0;
    cfg.phase_jitter = 0.0;
    cfg.damping = 0.2;
    Dataset ds = data::make_synthetic(cfg);
    const TimeSeriesSample& s = ds.samples[0];
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < 9; ++i) {
            const double t = static_cast<double>(i) / 8.0;
            const double expect = std::exp(-0.2 * static_cast<double>(c) * t) *
                                  std::sin(2.0 * kPi * t + static_cast<double>(c) * kPi / 4.0);
            CHECK(testutil::close_abs(s.values.at(c, i), expect, 1e-15));
        }
}

TEST_CASE("jittered timestamps stay strictly increasing and pinned at the ends") {
    SyntheticConfig cfg;
    cfg.channels = 2;
    cfg.length = 50;
    cfg.samples = 4;
    cfg.irregularity = 0.9;
    Dataset ds = data::make_synthetic(cfg);
    bool any_jitter = false;
    for (const TimeSeriesSample& s : ds.samples) {
        CHECK(s.times.front() == 0.0);
        CHECK(s.times.back() == 1.0);
        for (std::size_t i = 1; i < s.n_times(); ++i) CHECK(s.times[i] > s.times[i - 1]);
        for (std::size_t i = 1; i + 1 < s.n_times(); ++i)
            any_jitter = any_jitter || s.times[i] != static_cast<double>(i) / 49.0;
    }
    CHECK(any_jitter);
    CHECK_THROWS_AS(data::make_synthetic([] {
                        SyntheticConfig c;
                        c.irregularity = 1.0;
                        return c;
                    }()),
                    ConfigError);
}

TEST_CASE("synthetic generation is a pure function of the seed") {
    SyntheticConfig cfg;
    cfg.samples = 3;
    cfg.length = 10;
    Dataset a = data::make_synthetic(cfg);
    Dataset b = data::make_synthetic(cfg);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.samples[i].values.data == b.samples[i].values.data);
        CHECK(a.samples[i].times == b.samples[i].times);
    }
    cfg.seed = 2;
    Dataset c = data::make_synthetic(cfg);
    CHECK(a.samples[0].values.data != c.samples[0].values.data);
}

TEST_CASE("apply_missing hides exactly the floored fraction of visible cells") {
    Dataset ds = tiny_dataset();  // 10 visible cells
    data::apply_missing(ds, 0.5, 7);
    const TimeSeriesSample& s = ds.samples[0];
    std::size_t hidden = 0;
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < 5; ++i) {
            if (std::isnan(s.values.at(c, i))) {
                ++hidden;
                CHECK(s.eval_mask.get(c, i));
                // Ground truth keeps the original value.
                CHECK(!std::isnan(ds.truth_raw[0].at(c, i)));
            } else {
                CHECK(!s.eval_mask.get(c, i));
            }
        }
    CHECK(hidden == 5);
    CHECK(s.eval_mask.count() == 5);

    Dataset none = tiny_dataset();
    data::apply_missing(none, 0.0, 7);
    CHECK(none.samples[0].eval_mask.count() == 0);

    Dataset all = tiny_dataset();
    data::apply_missing(all, 1.0, 7);
    CHECK(all.samples[0].eval_mask.count() == 10);

    Dataset bad = tiny_dataset();
    CHECK_THROWS_AS(data::apply_missing(bad, 1.5, 7), ConfigError);
}

TEST_CASE("missing masks are seed-deterministic") {
    Dataset a = tiny_dataset(), b = tiny_dataset(), c = tiny_dataset();
    data::apply_missing(a, 0.4, 11);
    data::apply_missing(b, 0.4, 11);
    data::apply_missing(c, 0.4, 12);
    CHECK(a.samples[0].eval_mask == b.samples[0].eval_mask);
    CHECK(!(a.samples[0].eval_mask == c.samples[0].eval_mask));
}

TEST_CASE("splits are disjoint, exhaustive, and sized by the floored fractions") {
    SyntheticConfig cfg;
    cfg.samples = 10;
    cfg.length = 4;
    cfg.channels = 1;
    Dataset ds = data::make_synthetic(cfg);
    data::assign_splits(ds, 0.7, 0.1, 5);
    CHECK(ds.indices(Split::Train).size() == 7);
    CHECK(ds.indices(Split::Val).size() == 1);
    CHECK(ds.indices(Split::Test).size() == 2);

    Dataset big = data::make_synthetic([] {
        SyntheticConfig c;
        c.samples = 200;
        c.length = 4;
        c.channels = 1;
        return c;
    }());
    data::assign_splits(big, 0.7, 0.1, 5);
    CHECK(big.indices(Split::Train).size() == 140);
    CHECK(big.indices(Split::Val).size() == 20);
    CHECK(big.indices(Split::Test).size() == 40);

    Dataset again = data::make_synthetic([] {
        SyntheticConfig c;
        c.samples = 200;
        c.length = 4;
        c.channels = 1;
        return c;
    }());
    data::assign_splits(again, 0.7, 0.1, 5);
    CHECK(big.split == again.split);
}

TEST_CASE("standardization uses train-split statistics only") {
    // Train sample {1,2,3}; test sample with wild values must not move the stats.
    Dataset ds;
    for (double base : {0.0, 100.0}) {
        TimeSeriesSample s;
        s.raw_times = {0.0, 1.0, 2.0};
        s.times = rescale_times(s.raw_times);
        s.values = Array(Shape{1, 3}, {base + 1.0, base + 2.0, base + 3.0});
        s.observed = MaskGrid(1, 3, true);
        s.eval_mask = MaskGrid(1, 3, false);
        ds.samples.push_back(s);
        ds.truth_raw.push_back(s.values);
        ds.truth_model.push_back(s.values);
    }
    ds.split = {Split::Train, Split::Test};
    data::normalize(ds);

    const double std_expect = std::sqrt(2.0 / 3.0);
    CHECK(testutil::close_abs(ds.channel_mean[0], 2.0, 1e-15));
    CHECK(testutil::close_abs(ds.channel_std[0], std_expect, 1e-15));
    CHECK(testutil::close_abs(ds.samples[0].values.at(0, 0), -1.0 / std_expect, 1e-12));
    CHECK(testutil::close_abs(ds.samples[0].values.at(0, 1), 0.0, 1e-12));
    CHECK(testutil::close_abs(ds.truth_model[0].at(0, 2), 1.0 / std_expect, 1e-12));
    // The test sample is transformed with the train statistics.
    CHECK(testutil::close_abs(ds.samples[1].values.at(0, 0), 99.0 / std_expect, 1e-12));
    CHECK(ds.samples[0].channel_fill == std::vector<double>{0.0});

    // Round trip back to source units.
    Array back = data::denormalize(ds, ds.samples[0].values);
    CHECK(testutil::close_abs(back.at(0, 0), 1.0, 1e-12));
    CHECK(testutil::close_abs(back.at(0, 2), 3.0, 1e-12));

    CHECK_THROWS_AS(data::normalize(ds), Error);  // already normalized
}

TEST_CASE("constant channels fall back to unit scale") {
    Dataset ds;
    TimeSeriesSample s;
    s.raw_times = {0.0, 1.0, 2.0};
    s.times = rescale_times(s.raw_times);
    s.values = Array(Shape{1, 3}, {5.0, 5.0, 5.0});
    s.observed = MaskGrid(1, 3, true);
    s.eval_mask = MaskGrid(1, 3, false);
    ds.samples.push_back(s);
    ds.truth_raw.push_back(s.values);
    ds.truth_model.push_back(s.values);
    ds.split = {Split::Train};
    data::normalize(ds);
    CHECK(ds.channel_std[0] == 1.0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(ds.samples[0].values.at(0, i) == 0.0);
}

TEST_CASE("csv writing and loading round-trips values, gaps, and windows") {
    SyntheticConfig cfg;
    cfg.channels = 2;
    cfg.length = 8;
    cfg.samples = 2;
    cfg.irregularity = 0.4;
    Dataset ds = data::make_synthetic(cfg);
    data::apply_missing(ds, 0.25, 3);

    const std::string path = temp_path("roundtrip.csv");
    data::write_csv(ds, path);
    Dataset back = data::load_csv(path, 8);

    REQUIRE(back.size() == 2);
    for (std::size_t si = 0; si < 2; ++si) {
        CHECK(back.samples[si].raw_times == ds.samples[si].raw_times);
        CHECK(back.samples[si].times == ds.samples[si].times);
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t i = 0; i < 8; ++i) {
                const double a = ds.samples[si].values.at(c, i);
                const double b = back.samples[si].values.at(c, i);
                if (std::isnan(a))
                    CHECK(std::isnan(b));
                else
                    CHECK(a == b);  // %.17g is lossless for doubles
            }
        // Visibility survives; the loaded file cannot know the eval flags.
        CHECK(back.samples[si].observed == ds.samples[si].visibility());
    }
    std::remove(path.c_str());
}

TEST_CASE("row groups of `window` timestamps become samples, leftover included") {
    const std::string path = temp_path("window.csv");
    {
        std::ofstream out(path);
        out << "time,ch0\n";
        for (int i = 0; i < 10; ++i) out << i << "," << i * 0.5 << "\n";
    }
    Dataset ds = data::load_csv(path, 4);
    REQUIRE(ds.size() == 3);
    CHECK(ds.samples[0].n_times() == 4);
    CHECK(ds.samples[1].n_times() == 4);
    CHECK(ds.samples[2].n_times() == 2);
    // Timestamps rescale to [0,1] per sample.
    CHECK(ds.samples[1].times.front() == 0.0);
    CHECK(ds.samples[1].times.back() == 1.0);
    CHECK(ds.samples[1].raw_times.front() == 4.0);

    Dataset whole = data::load_csv(path, 0);
    REQUIRE(whole.size() == 1);
    CHECK(whole.samples[0].n_times() == 10);
    std::remove(path.c_str());
}

TEST_CASE("a two-row single-channel file is one sample with one interval") {
    const std::string path = temp_path("two_rows.csv");
    {
        std::ofstream out(path);
        out << "0,1.5\n1,2.5\n";  // no header: first field parses as a number
    }
    Dataset ds = data::load_csv(path, 0);
    REQUIRE(ds.size() == 1);
    CHECK(ds.samples[0].n_times() == 2);
    CHECK(ds.channels() == 1);
    CHECK(ds.samples[0].values.at(0, 0) == 1.5);
    CHECK(ds.samples[0].values.at(0, 1) == 2.5);
    std::remove(path.c_str());
}

TEST_CASE("malformed csv input fails with the offending line number") {
    const std::string ragged = temp_path("ragged.csv");
    {
        std::ofstream out(ragged);
        out << "time,ch0,ch1\n0,1,2\n1,3\n";
    }
    try {
        data::load_csv(ragged, 0);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }
    std::remove(ragged.c_str());

    const std::string backwards = temp_path("backwards.csv");
    {
        std::ofstream out(backwards);
        out << "0,1\n2,2\n1,3\n";
    }
    try {
        data::load_csv(backwards, 0);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("increase") != std::string::npos);
        CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }
    std::remove(backwards.c_str());

    const std::string bad = temp_path("bad_value.csv");
    {
        std::ofstream out(bad);
        out << "0,1\n1,oops\n";
    }
    CHECK_THROWS_AS(data::load_csv(bad, 0), ParseError);
    std::remove(bad.c_str());

    CHECK_THROWS_AS(data::load_csv("/nonexistent/nowhere.csv", 0), Error);

    const std::string empty = temp_path("empty.csv");
    {
        std::ofstream out(empty);
        out << "# only a comment\n";
    }
    CHECK_THROWS_AS(data::load_csv(empty, 0), ParseError);
    std::remove(empty.c_str());
}
