#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "cta/rng.hpp"
#include "cta/spline.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cta;
using namespace cta::spline;

namespace {

// Independent closed-form oracle for a natural cubic spline over exactly
// three knots: the single interior curvature M1 solves
//   ((h0+h1)/3) M1 = (y2-y1)/h1 - (y1-y0)/h0,
// and on [t_i, t_i+1] (with M0 = M2 = 0):
//   S(t) = A y_i + B y_i+1 + ((A^3-A) h^2/6) M_i + ((B^3-B) h^2/6) M_i+1.
double three_knot_value(const double t[3], const double y[3], double q) {
    double h0 = t[1] - t[0], h1 = t[2] - t[1];
    double m1 = ((y[2] - y[1]) / h1 - (y[1] - y[0]) / h0) / ((h0 + h1) / 3.0);
    int i = q < t[1] ? 0 : 1;
    double h = t[i + 1] - t[i];
    double A = (t[i + 1] - q) / h;
    double B = (q - t[i]) / h;
    double mi = i == 0 ? 0.0 : m1;
    double mi1 = i == 0 ? m1 : 0.0;
    return A * y[i] + B * y[i + 1] + (A * A * A - A) * h * h / 6.0 * mi +
           (B * B * B - B) * h * h / 6.0 * mi1;
}

ChannelSpline random_spline(Rng& rng, std::size_t n, std::vector<double>* tout = nullptr,
                            std::vector<double>* yout = nullptr) {
    std::vector<double> t(n), y(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += 0.05 + rng.uniform01();
        t[i] = acc;
        y[i] = rng.normal();
    }
    if (tout) *tout = t;
    if (yout) *yout = y;
    return build_channel_spline(t, y);
}

}  // namespace

TEST_CASE("interpolates its knots") {
    Rng rng(3);
    for (int rep = 0; rep < 5; ++rep) {
        std::vector<double> t, y;
        ChannelSpline s = random_spline(rng, 12, &t, &y);
        for (std::size_t i = 0; i < t.size(); ++i)
            CHECK(std::abs(s.value(t[i]) - y[i]) < 1e-9);
    }
}

TEST_CASE("matches the three-knot closed form") {
    const double t[3] = {0.0, 1.0, 2.0};
    const double y[3] = {0.0, 1.0, 0.0};
    ChannelSpline s = build_channel_spline({t[0], t[1], t[2]}, {y[0], y[1], y[2]});
    // Frozen value: A=B=1/2, M1=-3 -> S(1.5) = 0.5 + (0.125-0.5)*(-0.5) = 0.6875.
    CHECK(std::abs(three_knot_value(t, y, 1.5) - 0.6875) < 1e-15);
    CHECK(std::abs(s.value(1.5) - 0.6875) < 1e-9);
    for (double q : {0.25, 0.8, 1.1, 1.9})
        CHECK(std::abs(s.value(q) - three_knot_value(t, y, q)) < 1e-9);
}

TEST_CASE("two knots give the straight line") {
    ChannelSpline s = build_channel_spline({0.0, 1.0}, {1.0, 3.0});
    CHECK(std::abs(s.value(0.5) - 2.0) < 1e-12);
    CHECK(std::abs(s.derivative(0.5) - 2.0) < 1e-12);
}

TEST_CASE("single knot holds a constant with zero derivative") {
    ChannelSpline s = build_channel_spline({0.3}, {4.5});
    CHECK(s.value(0.0) == 4.5);
    CHECK(s.value(0.3) == 4.5);
    CHECK(s.value(9.0) == 4.5);
    CHECK(s.derivative(0.5) == 0.0);
}

TEST_CASE("analytic derivative matches finite differences of the value") {
    Rng rng(17);
    std::vector<double> t, y;
    ChannelSpline s = random_spline(rng, 9, &t, &y);
    double h = 1e-6;
    for (double frac : {0.13, 0.37, 0.52, 0.78, 0.95}) {
        double q = t.front() + frac * (t.back() - t.front());
        double fd = (s.value(q + h) - s.value(q - h)) / (2.0 * h);
        CHECK(std::abs(s.derivative(q) - fd) < 1e-6);
    }
}

TEST_CASE("C1 and C2 continuity at interior knots, natural boundary curvature") {
    Rng rng(29);
    std::vector<double> t, y;
    ChannelSpline s = random_spline(rng, 8, &t, &y);
    // The second derivative is linear inside an interval and central
    // differences of the (quadratic) first derivative are exact for cubics,
    // so two interior estimates extrapolate exactly to the one-sided limit.
    double h = 1e-4;
    auto curv = [&](double x) { return (s.derivative(x + h) - s.derivative(x - h)) / (2.0 * h); };
    auto limit_at = [&](double knot, double side) {
        double x2 = knot + side * 3.0 * h;
        double x1 = knot + side * 8.0 * h;
        double c1 = curv(x1), c2 = curv(x2);
        return c2 + (c2 - c1) / (x2 - x1) * (knot - x2);
    };
    for (std::size_t i = 1; i + 1 < t.size(); ++i) {
        double dl = s.derivative(t[i] - 1e-12);
        double dr = s.derivative(t[i] + 1e-12);
        CHECK(std::abs(dl - dr) < 1e-8);  // first derivative continuous
        CHECK(std::abs(limit_at(t[i], -1.0) - limit_at(t[i], +1.0)) < 1e-6);
    }
    // natural boundary: curvature ~ 0 at both ends
    CHECK(std::abs(limit_at(t.front(), +1.0)) < 1e-6);
    CHECK(std::abs(limit_at(t.back(), -1.0)) < 1e-6);
}

TEST_CASE("constant hold outside the knot span") {
    ChannelSpline s = build_channel_spline({1.0, 2.0, 3.0}, {5.0, 7.0, 6.0});
    CHECK(s.value(0.0) == 5.0);
    CHECK(s.value(-10.0) == 5.0);
    CHECK(std::abs(s.value(4.0) - 6.0) < 1e-12);
    CHECK(s.derivative(0.5) == 0.0);
    CHECK(s.derivative(3.5) == 0.0);
}

TEST_CASE("control path ignores hidden cells bit for bit") {
    auto make = [](double hidden_probe) {
        TimeSeriesSample smp;
        smp.raw_times = {0.0, 1.0, 2.0, 3.0};
        smp.times = rescale_times(smp.raw_times);
        smp.values = ad::Array({2, 4}, {1.0, std::nan(""), 3.0, 4.0,  //
                                        0.5, 1.5, std::nan(""), 2.5});
        smp.observed = MaskGrid(2, 4, true);
        smp.observed.set(0, 1, false);
        smp.observed.set(1, 2, false);
        smp.eval_mask = MaskGrid(2, 4);
        (void)hidden_probe;  // hidden cells carry no value to perturb: they are NaN
        return build_control_path(smp);
    };
    ControlPath p = make(0.0);
    CHECK(p.dim() == 2);
    CHECK(p.channels[0].knots.size() == 3);
    CHECK(p.channels[1].knots.size() == 3);
    // values at visible knots are reproduced
    CHECK(std::abs(p.channels[0].value(0.0) - 1.0) < 1e-12);
    CHECK(std::abs(p.channels[1].value(1.0 / 3.0) - 1.5) < 1e-12);
}

TEST_CASE("fully hidden channel errors by name, fill value rescues it") {
    TimeSeriesSample smp;
    smp.raw_times = {0.0, 1.0};
    smp.times = rescale_times(smp.raw_times);
    smp.values = ad::Array({2, 2}, {1.0, 2.0, std::nan(""), std::nan("")});
    smp.observed = MaskGrid(2, 2, true);
    smp.observed.set(1, 0, false);
    smp.observed.set(1, 1, false);
    smp.eval_mask = MaskGrid(2, 2);
    CHECK_THROWS_WITH_AS(build_control_path(smp), doctest::Contains("channel 1"), Error);

    smp.channel_fill = {0.0, -2.5};
    ControlPath p = build_control_path(smp);
    CHECK(p.channels[1].value(0.7) == -2.5);
    CHECK(p.channels[1].derivative(0.7) == 0.0);
}

TEST_CASE("weight-operator route agrees with the coefficient route") {
    Rng rng(41);
    std::vector<double> t, y;
    ChannelSpline s = random_spline(rng, 10, &t, &y);
    SplineWeights w = build_spline_weights(t);
    std::vector<double> row(t.size());
    for (double frac : {0.05, 0.33, 0.61, 0.99}) {
        double q = t.front() + frac * (t.back() - t.front());
        w.value_row(q, row.data());
        double val = 0.0;
        for (std::size_t j = 0; j < t.size(); ++j) val += row[j] * y[j];
        CHECK(std::abs(val - s.value(q)) < 1e-9);
        w.derivative_row(q, row.data());
        double der = 0.0;
        for (std::size_t j = 0; j < t.size(); ++j) der += row[j] * y[j];
        CHECK(std::abs(der - s.derivative(q)) < 1e-9);
    }
}

TEST_CASE("non-increasing knots are rejected") {
    CHECK_THROWS_AS(build_channel_spline({0.0, 1.0, 1.0}, {1.0, 2.0, 3.0}), Error);
    CHECK_THROWS_AS(build_channel_spline({0.0, -1.0}, {1.0, 2.0}), Error);
}
