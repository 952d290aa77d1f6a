#include "cta/ncde.hpp"

#include <cmath>
#include <string>
#include <unordered_map>

namespace cta::ncde {

using namespace cta::ad;

FieldNet FieldNet::create(ParamStore& store, const std::string& name, std::size_t in_dim,
                          std::size_t hidden, std::size_t n_hidden, std::size_t out_rows,
                          std::size_t out_cols, Rng& rng) {
    FieldNet f;
    f.in_dim = in_dim;
    f.hidden = hidden;
    f.out_rows = out_rows;
    f.out_cols = out_cols;
    std::size_t prev = in_dim;
    for (std::size_t l = 0; l < n_hidden; ++l) {
        f.w.push_back(&store.create(name + ".w" + std::to_string(l), {hidden, prev}, prev, rng));
        f.b.push_back(&store.create(name + ".b" + std::to_string(l), {hidden}, prev, rng));
        prev = hidden;
    }
    std::size_t out = out_rows * out_cols;
    f.w.push_back(&store.create(name + ".w_out", {out, prev}, prev, rng));
    f.b.push_back(&store.create(name + ".b_out", {out}, prev, rng));
    return f;
}

Var FieldNet::forward(Tape& t, Var input) const {
    Var h = input;
    for (std::size_t l = 0; l + 1 < w.size(); ++l)
        h = silu(add(matmul(t.use(*w[l]), h), t.use(*b[l])));
    Var out = cta::ad::tanh(add(matmul(t.use(*w.back()), h), t.use(*b.back())));
    return reshape(out, {out_rows, out_cols});
}

Affine Affine::create(ParamStore& store, const std::string& name, std::size_t out_dim,
                      std::size_t in_dim, Rng& rng) {
    Affine a;
    a.w = &store.create(name + ".w", {out_dim, in_dim}, in_dim, rng);
    a.b = &store.create(name + ".b", {out_dim}, in_dim, rng);
    return a;
}

Var Affine::forward(Tape& t, Var x) const { return add(matmul(t.use(*w), x), t.use(*b)); }

LayerCore LayerCore::create(ParamStore& store, const std::string& prefix, Variant variant,
                            std::size_t control_dim, std::size_t latent_dim,
                            std::size_t decoder_dim, std::size_t hidden, std::size_t n_hidden,
                            bool time_feature, Rng& rng) {
    LayerCore c;
    c.variant = variant;
    c.latent_dim = latent_dim;
    c.decoder_dim = decoder_dim;
    c.control_dim = control_dim;
    c.time_feature = time_feature;
    std::size_t enc_in = (variant == Variant::VAE ? 2 * latent_dim : latent_dim);
    if (time_feature) enc_in += 1;
    c.g_mu = FieldNet::create(store, prefix + ".g_mu", enc_in, hidden, n_hidden, latent_dim,
                              control_dim, rng);
    if (variant == Variant::VAE)
        c.g_sigma = FieldNet::create(store, prefix + ".g_sigma", enc_in, hidden, n_hidden,
                                     latent_dim, control_dim, rng);
    c.k = FieldNet::create(store, prefix + ".k", decoder_dim, hidden, n_hidden, decoder_dim,
                           latent_dim, rng);
    c.fc_mu = Affine::create(store, prefix + ".fc_mu", latent_dim, control_dim, rng);
    if (variant == Variant::VAE)
        c.fc_sigma = Affine::create(store, prefix + ".fc_sigma", latent_dim, control_dim, rng);
    c.fc_d = Affine::create(store, prefix + ".fc_d", decoder_dim, control_dim, rng);
    return c;
}

NoiseDraw NoiseDraw::gaussian(std::size_t dim, Rng& rng) {
    NoiseDraw n;
    n.epsilon.resize(dim);
    for (auto& e : n.epsilon) e = rng.normal();
    return n;
}

Var hidden_path_value(Tape& t, const AugmentedVars& state, const NoiseDraw& noise,
                      Variant variant) {
    if (variant == Variant::AE) return state.mu;
    if (!state.sigma) throw Error("hidden_path_value: VAE state lacks sigma");
    Var eps = t.leaf(Array({noise.epsilon.size()}, noise.epsilon));
    return add(state.mu, mul(eps, cta::ad::exp(*state.sigma)));
}

AugmentedVars initial_state(Tape& t, const LayerCore& core, Var x0) {
    AugmentedVars s;
    s.mu = core.fc_mu.forward(t, x0);
    if (core.variant == Variant::VAE) {
        s.sigma = core.fc_sigma->forward(t, x0);
        s.kld = t.leaf(0.0);
    }
    s.dec = core.fc_d.forward(t, x0);
    return s;
}

AugmentedVars augmented_rhs(Tape& t, const LayerCore& core, const AugmentedVars& state,
                            Var path_deriv, const NoiseDraw& noise, double time) {
    Var e = state.mu;
    if (core.variant == Variant::VAE) {
        if (!state.sigma) throw Error("augmented_rhs: VAE state lacks sigma");
        e = concat(state.mu, *state.sigma);
    }
    if (core.time_feature) e = concat(e, t.leaf(Array({1}, {time})));

    AugmentedVars d;
    Var g_mu = core.g_mu.forward(t, e);
    d.mu = matmul(g_mu, path_deriv);
    if (core.variant == Variant::VAE) {
        Var g_sigma = core.g_sigma->forward(t, e);
        Var dsigma = matmul(g_sigma, path_deriv);
        d.sigma = dsigma;
        Var eps = t.leaf(Array({noise.epsilon.size()}, noise.epsilon));
        Var dh = add(d.mu, mul(mul(eps, cta::ad::exp(*state.sigma)), dsigma));
        d.dec = matmul(core.k.forward(t, state.dec), dh);
        // divergence density 0.5 * sum(exp(2 sigma) + mu^2 - 1 - 2 sigma)
        Var ssum = add(sum(cta::ad::exp(smul(*state.sigma, 2.0))), sum(square(state.mu)));
        Var dens = sub(smul(ssum, 0.5), t.leaf(0.5 * static_cast<double>(core.latent_dim)));
        d.kld = sub(dens, sum(*state.sigma));
    } else {
        d.dec = matmul(core.k.forward(t, state.dec), d.mu);
    }
    return d;
}

Schedule build_schedule(double t0, double t1, double step, const std::vector<double>& outputs) {
    if (!(step > 0.0)) throw Error("solver: step must be positive");
    if (t1 < t0) throw Error("solver: t1 < t0");
    const double tol = 1e-12 * std::max(1.0, std::abs(t1 - t0));
    Schedule sch;
    sch.times.push_back(t0);
    std::vector<double> landmarks;
    for (double o : outputs) {
        if (o < t0 - tol || o > t1 + tol)
            throw Error("solver: output time " + std::to_string(o) + " outside solve span");
        landmarks.push_back(std::min(std::max(o, t0), t1));
    }
    for (std::size_t k = 0; k < landmarks.size(); ++k)
        if (k > 0 && !(landmarks[k] > landmarks[k - 1]))
            throw Error("solver: output times must be strictly increasing");

    std::size_t next_out = 0;
    if (next_out < landmarks.size() && std::abs(landmarks[next_out] - t0) <= tol) {
        sch.output_at.push_back(0);  // t0 itself is an output
        ++next_out;
    }
    double cur = t0;
    while (next_out < landmarks.size() || cur < t1 - tol) {
        bool toward_landmark = next_out < landmarks.size();
        double goal = toward_landmark ? landmarks[next_out] : t1;
        // full steps, then one shortened step to land exactly on the goal
        while (goal - cur > step + tol) {
            cur += step;
            sch.times.push_back(cur);
        }
        cur = goal;
        sch.times.push_back(cur);
        if (toward_landmark) {
            sch.output_at.push_back(sch.times.size() - 1);
            ++next_out;
        }
    }
    return sch;
}

std::vector<std::vector<Var>> solve_fixed_step(Tape& t, std::vector<Var> state0, const Rhs& rhs,
                                               const Schedule& schedule, SolveMethod method) {
    std::vector<char> is_output(schedule.times.size(), 0);
    for (std::size_t idx : schedule.output_at) is_output[idx] = 1;

    auto check_finite = [&](const std::vector<Var>& st, double at) {
        for (const Var& v : st)
            if (!t.val(v).all_finite())
                throw DivergenceError("solver: non-finite state at t=" + std::to_string(at), at);
    };

    std::vector<std::vector<Var>> outputs;
    std::vector<Var> state = std::move(state0);
    check_finite(state, schedule.times.front());
    if (is_output[0]) outputs.push_back(state);

    auto axpy = [&](const std::vector<Var>& y, const std::vector<Var>& dy, double s) {
        std::vector<Var> out;
        out.reserve(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) out.push_back(add(y[i], smul(dy[i], s)));
        return out;
    };

    for (std::size_t i = 0; i + 1 < schedule.times.size(); ++i) {
        double ta = schedule.times[i];
        double s = schedule.times[i + 1] - ta;
        if (method == SolveMethod::Euler) {
            std::vector<Var> dy = rhs(ta, state);
            state = axpy(state, dy, s);
        } else {
            std::vector<Var> k1 = rhs(ta, state);
            std::vector<Var> k2 = rhs(ta + 0.5 * s, axpy(state, k1, 0.5 * s));
            std::vector<Var> k3 = rhs(ta + 0.5 * s, axpy(state, k2, 0.5 * s));
            std::vector<Var> k4 = rhs(ta + s, axpy(state, k3, s));
            std::vector<Var> next;
            next.reserve(state.size());
            for (std::size_t j = 0; j < state.size(); ++j) {
                Var blend = add(add(k1[j], smul(k2[j], 2.0)), add(smul(k3[j], 2.0), k4[j]));
                next.push_back(add(state[j], smul(blend, s / 6.0)));
            }
            state = std::move(next);
        }
        check_finite(state, schedule.times[i + 1]);
        if (is_output[i + 1]) outputs.push_back(state);
    }
    return outputs;
}

std::vector<AugmentedVars> euler_solve(Tape& t, const LayerCore& core, const AugmentedVars& state0,
                                       const std::function<Var(double)>& path_deriv_at,
                                       const NoiseDraw& noise, double step,
                                       const std::vector<double>& output_times,
                                       SolveMethod method) {
    if (output_times.empty()) throw Error("solver: no output times");
    bool vae = core.variant == Variant::VAE;

    auto pack = [&](const AugmentedVars& a) {
        std::vector<Var> v{a.mu};
        if (vae) v.push_back(*a.sigma);
        v.push_back(a.dec);
        if (vae) v.push_back(*a.kld);
        return v;
    };
    auto unpack = [&](const std::vector<Var>& v) {
        AugmentedVars a;
        std::size_t i = 0;
        a.mu = v[i++];
        if (vae) a.sigma = v[i++];
        a.dec = v[i++];
        if (vae) a.kld = v[i++];
        return a;
    };

    Rhs rhs = [&](double time, const std::vector<Var>& v) {
        AugmentedVars st = unpack(v);
        AugmentedVars d = augmented_rhs(t, core, st, path_deriv_at(time), noise, time);
        return pack(d);
    };

    Schedule sch = build_schedule(output_times.front(), output_times.back(), step, output_times);
    auto raw = solve_fixed_step(t, pack(state0), rhs, sch, method);
    std::vector<AugmentedVars> out;
    out.reserve(raw.size());
    for (auto& v : raw) out.push_back(unpack(v));
    return out;
}

}  // namespace cta::ncde
