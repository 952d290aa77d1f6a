#include "cta/spline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cta::spline {

namespace {

// Second derivatives M at the knots of a natural cubic spline: tridiagonal
// system over interior knots, M at the boundary fixed to zero.
std::vector<double> natural_curvatures(const std::vector<double>& t,
                                       const std::vector<double>& y) {
    std::size_t n = t.size();
    std::vector<double> m(n, 0.0);
    if (n < 3) return m;
    std::size_t k = n - 2;  // interior unknowns
    std::vector<double> lower(k, 0.0), diag(k, 0.0), upper(k, 0.0), rhs(k, 0.0);
    for (std::size_t i = 1; i + 1 <= n - 1; ++i) {
        double h0 = t[i] - t[i - 1];
        double h1 = t[i + 1] - t[i];
        lower[i - 1] = h0 / 6.0;
        diag[i - 1] = (h0 + h1) / 3.0;
        upper[i - 1] = h1 / 6.0;
        rhs[i - 1] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
    }
    // Thomas algorithm.
    for (std::size_t i = 1; i < k; ++i) {
        double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    m[k] = rhs[k - 1] / diag[k - 1];
    for (std::size_t i = k - 1; i >= 1; --i) m[i] = (rhs[i - 1] - upper[i - 1] * m[i + 1]) / diag[i - 1];
    return m;
}

void check_increasing(const std::vector<double>& t) {
    for (std::size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1]))
            throw Error("spline: knot times must be strictly increasing (knot " +
                        std::to_string(i) + ")");
}

// Index of the interval containing t, clamped to valid intervals.
std::size_t interval_of(const std::vector<double>& knots, double t) {
    std::size_t n = knots.size();
    auto it = std::upper_bound(knots.begin(), knots.end(), t);
    std::size_t i = static_cast<std::size_t>(it - knots.begin());
    if (i == 0) return 0;
    if (i >= n) return n - 2;
    return i - 1;
}

}  // namespace

ChannelSpline build_channel_spline(const std::vector<double>& times,
                                   const std::vector<double>& values) {
    if (times.empty() || times.size() != values.size())
        throw Error("spline: need matching, non-empty knot times and values");
    check_increasing(times);
    ChannelSpline s;
    s.knots = times;
    std::size_t n = times.size();
    if (n == 1) {
        s.a = {values[0]};  // constant path, no intervals
        return s;
    }
    std::vector<double> m = natural_curvatures(times, values);
    s.a.resize(n - 1);
    s.b.resize(n - 1);
    s.c.resize(n - 1);
    s.d.resize(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double h = times[i + 1] - times[i];
        s.a[i] = values[i];
        s.b[i] = (values[i + 1] - values[i]) / h - h * (2.0 * m[i] + m[i + 1]) / 6.0;
        s.c[i] = m[i] / 2.0;
        s.d[i] = (m[i + 1] - m[i]) / (6.0 * h);
    }
    return s;
}

double ChannelSpline::value(double t) const {
    if (knots.size() == 1 || t <= knots.front()) {
        // constant hold left of the span (or single-knot path)
        return a.front();
    }
    if (t >= knots.back()) {
        std::size_t i = knots.size() - 2;
        double h = knots[i + 1] - knots[i];
        return a[i] + b[i] * h + c[i] * h * h + d[i] * h * h * h;
    }
    std::size_t i = interval_of(knots, t);
    double dt = t - knots[i];
    return a[i] + b[i] * dt + c[i] * dt * dt + d[i] * dt * dt * dt;
}

double ChannelSpline::derivative(double t) const {
    if (knots.size() == 1 || t < knots.front() || t > knots.back()) return 0.0;
    std::size_t i = interval_of(knots, t);
    double dt = t - knots[i];
    return b[i] + 2.0 * c[i] * dt + 3.0 * d[i] * dt * dt;
}

ad::Array ControlPath::value(double t) const {
    ad::Array out(ad::Shape{dim()}, 0.0);
    for (std::size_t c = 0; c < dim(); ++c) out.data[c] = channels[c].value(t);
    return out;
}

ad::Array ControlPath::derivative(double t) const {
    ad::Array out(ad::Shape{dim()}, 0.0);
    for (std::size_t c = 0; c < dim(); ++c) out.data[c] = channels[c].derivative(t);
    return out;
}

ControlPath build_control_path(const TimeSeriesSample& sample) {
    ControlPath path;
    path.t0 = sample.times.front();
    path.t1 = sample.times.back();
    for (std::size_t c = 0; c < sample.channels(); ++c) {
        std::vector<double> kt, kv;
        for (std::size_t i = 0; i < sample.n_times(); ++i) {
            if (sample.visible(c, i)) {
                kt.push_back(sample.times[i]);
                kv.push_back(sample.values.at(c, i));
            }
        }
        if (kt.empty()) {
            if (c < sample.channel_fill.size()) {
                kt.push_back(path.t0);
                kv.push_back(sample.channel_fill[c]);
            } else {
                throw Error("control path: channel " + std::to_string(c) +
                            " has no visible values and no fill value");
            }
        }
        path.channels.push_back(build_channel_spline(kt, kv));
    }
    return path;
}

SplineWeights build_spline_weights(const std::vector<double>& knot_times) {
    check_increasing(knot_times);
    if (knot_times.empty()) throw Error("spline weights: no knots");
    SplineWeights w;
    w.knots = knot_times;
    std::size_t n = knot_times.size();
    w.curvature = ad::Array(ad::Shape{n, n}, 0.0);
    if (n < 3) return w;  // natural spline over <=2 knots has zero curvature

    std::size_t k = n - 2;
    const std::vector<double>& t = knot_times;
    std::vector<double> lower(k), diag(k), upper(k);
    // rhs matrix R: k x n, row i couples y[i-1], y[i], y[i+1]
    std::vector<std::vector<double>> rhs(k, std::vector<double>(n, 0.0));
    for (std::size_t i = 1; i <= k; ++i) {
        double h0 = t[i] - t[i - 1];
        double h1 = t[i + 1] - t[i];
        lower[i - 1] = h0 / 6.0;
        diag[i - 1] = (h0 + h1) / 3.0;
        upper[i - 1] = h1 / 6.0;
        rhs[i - 1][i - 1] += 1.0 / h0;
        rhs[i - 1][i] += -1.0 / h1 - 1.0 / h0;
        rhs[i - 1][i + 1] += 1.0 / h1;
    }
    // Thomas with n right-hand-side columns.
    for (std::size_t i = 1; i < k; ++i) {
        double f = lower[i] / diag[i - 1];
        diag[i] -= f * upper[i - 1];
        for (std::size_t j = 0; j < n; ++j) rhs[i][j] -= f * rhs[i - 1][j];
    }
    for (std::size_t j = 0; j < n; ++j)
        w.curvature.at(k, j) = rhs[k - 1][j] / diag[k - 1];
    for (std::size_t i = k - 1; i >= 1; --i)
        for (std::size_t j = 0; j < n; ++j)
            w.curvature.at(i, j) = (rhs[i - 1][j] - upper[i - 1] * w.curvature.at(i + 1, j)) /
                                   diag[i - 1];
    return w;
}

void SplineWeights::value_row(double t, double* out) const {
    std::size_t n = knots.size();
    std::fill(out, out + n, 0.0);
    if (n == 1 || t <= knots.front()) {
        out[0] = 1.0;
        return;
    }
    if (t >= knots.back()) {
        out[n - 1] = 1.0;  // constant hold right of the span
        return;
    }
    std::size_t i = interval_of(knots, t);
    double h = knots[i + 1] - knots[i];
    double A = (knots[i + 1] - t) / h;
    double B = (t - knots[i]) / h;
    double ca = (A * A * A - A) * h * h / 6.0;
    double cb = (B * B * B - B) * h * h / 6.0;
    out[i] += A;
    out[i + 1] += B;
    for (std::size_t j = 0; j < n; ++j)
        out[j] += ca * curvature.at(i, j) + cb * curvature.at(i + 1, j);
}

void SplineWeights::derivative_row(double t, double* out) const {
    std::size_t n = knots.size();
    std::fill(out, out + n, 0.0);
    if (n == 1 || t < knots.front() || t > knots.back()) return;
    std::size_t i = interval_of(knots, t);
    double h = knots[i + 1] - knots[i];
    double A = (knots[i + 1] - t) / h;
    double B = (t - knots[i]) / h;
    double ca = (1.0 - 3.0 * A * A) * h / 6.0;
    double cb = (3.0 * B * B - 1.0) * h / 6.0;
    out[i] += -1.0 / h;
    out[i + 1] += 1.0 / h;
    for (std::size_t j = 0; j < n; ++j)
        out[j] += ca * curvature.at(i, j) + cb * curvature.at(i + 1, j);
}

}  // namespace cta::spline
