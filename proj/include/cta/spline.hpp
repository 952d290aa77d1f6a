#pragma once

#include <vector>

#include "cta/array.hpp"
#include "cta/sample.hpp"

namespace cta::spline {

// Natural cubic interpolant for one channel over its visible knots.
// Piecewise cubic on [knots[i], knots[i+1]]:
//   S(t) = a[i] + b[i] dt + c[i] dt^2 + d[i] dt^3,  dt = t - knots[i].
// Outside the knot span the path holds the boundary value with derivative 0.
// One knot degenerates to a constant path; two knots are linear.
struct ChannelSpline {
    std::vector<double> knots;         // strictly increasing times
    std::vector<double> a, b, c, d;    // per-interval coefficients (n-1 entries)

    double value(double t) const;
    double derivative(double t) const;
};

ChannelSpline build_channel_spline(const std::vector<double>& times,
                                   const std::vector<double>& values);

// Continuous control path X(t) for one sample: an independent natural cubic
// spline per channel over that channel's visible knots.
struct ControlPath {
    std::vector<ChannelSpline> channels;
    double t0 = 0.0, t1 = 1.0;

    std::size_t dim() const { return channels.size(); }
    ad::Array value(double t) const;        // {dim}
    ad::Array derivative(double t) const;   // {dim}
};

// Builds the path from the sample's visible cells only (its hidden cells never
// influence the interpolant). A channel with no visible cell falls back to a
// constant path at channel_fill[c] when provided; otherwise this is an error
// naming the channel.
ControlPath build_control_path(const TimeSeriesSample& sample);

// The same interpolant expressed as a linear operator on knot values: for
// fixed knot times, S(t) = w(t) . y and S'(t) = w'(t) . y. Used where the knot
// values are differentiable quantities, so path derivatives stay linear in
// them. `curvature` maps knot values to second derivatives at the knots
// (natural boundary rows are zero).
struct SplineWeights {
    std::vector<double> knots;
    ad::Array curvature;  // {n, n}

    void value_row(double t, double* out) const;       // w(t), length n
    void derivative_row(double t, double* out) const;  // w'(t), length n
};

SplineWeights build_spline_weights(const std::vector<double>& knot_times);

}  // namespace cta::spline
