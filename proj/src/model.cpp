#include "cta/model.hpp"

#include <cctype>
#include <cmath>
#include <functional>
#include <sstream>
#include <utility>

#include "cta/errors.hpp"

namespace cta::model {

using ad::Array;
using ad::Shape;
using ad::Tape;
using ad::Var;

std::vector<Variant> parse_chain_spec(const std::string& spec) {
    std::vector<Variant> chain;
    std::string token;
    std::stringstream ss(spec);
    while (std::getline(ss, token, '-')) {
        std::string up;
        for (char ch : token)
            if (!std::isspace(static_cast<unsigned char>(ch)))
                up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
        if (up == "AE")
            chain.push_back(Variant::AE);
        else if (up == "VAE")
            chain.push_back(Variant::VAE);
        else
            throw ConfigError("bad chain spec '" + spec + "': unknown layer '" + token + "'");
    }
    if (chain.empty() || chain.size() > 3)
        throw ConfigError("bad chain spec '" + spec + "': need 1 to 3 layers");
    return chain;
}

std::string chain_spec_str(const std::vector<Variant>& chain) {
    std::string out;
    for (std::size_t i = 0; i < chain.size(); ++i) {
        if (i) out += '-';
        out += chain[i] == Variant::AE ? "AE" : "VAE";
    }
    return out;
}

OutputHead OutputHead::create(ad::ParamStore& store, const std::string& prefix,
                              std::size_t channels, std::size_t decoder_dim, std::size_t hidden,
                              Rng& rng) {
    OutputHead h;
    h.fc1 = ncde::Affine::create(store, prefix + ".fc1", hidden, decoder_dim, rng);
    h.fc2 = ncde::Affine::create(store, prefix + ".fc2", channels, hidden, rng);
    return h;
}

Var OutputHead::apply(Tape& t, Var dec) const {
    return fc2.forward(t, ad::elu(fc1.forward(t, dec)));
}

Chain Chain::create(ChainConfig cfg, std::uint64_t seed) {
    if (cfg.channels == 0) throw ConfigError("chain needs at least one channel");
    if (cfg.chain.empty() || cfg.chain.size() > 3)
        throw ConfigError("chain needs 1 to 3 layers");
    if (cfg.latent_dim == 0 || cfg.decoder_dim == 0 || cfg.field_hidden == 0 ||
        cfg.head_hidden == 0)
        throw ConfigError("model dimensions must be positive");

    Chain chain;
    chain.cfg = cfg;
    Rng rng(seed);
    for (std::size_t i = 0; i < cfg.chain.size(); ++i) {
        const std::string prefix = "layer" + std::to_string(i);
        Layer layer;
        layer.core = ncde::LayerCore::create(chain.store, prefix, cfg.chain[i], cfg.channels,
                                             cfg.latent_dim, cfg.decoder_dim, cfg.field_hidden,
                                             cfg.field_layers, cfg.time_feature, rng);
        layer.head = OutputHead::create(chain.store, prefix + ".head", cfg.channels,
                                        cfg.decoder_dim, cfg.head_hidden, rng);
        const bool gated = cfg.chain.size() >= 2 && i + 1 == cfg.chain.size();
        if (gated) {
            const std::size_t gate_in = cfg.decoder_dim + (cfg.masked_alpha ? cfg.channels : 0);
            layer.fc3 = ncde::Affine::create(chain.store, prefix + ".fc3", cfg.channels, gate_in,
                                             rng);
        }
        chain.layers.push_back(std::move(layer));
    }
    return chain;
}

double Chain::effective_step(std::size_t n_times) const {
    if (cfg.step > 0.0) return cfg.step;
    const std::size_t intervals = n_times > 1 ? n_times - 1 : 1;
    return 1.0 / (4.0 * static_cast<double>(intervals));
}

namespace {

struct LayerRun {
    std::vector<Var> heads;  // head output per observation time, {channels}
    std::vector<Var> decs;   // decoder state per observation time
    std::optional<Var> kld;
};

LayerRun run_layer(Tape& t, const Layer& layer, const ChainConfig& cfg, Var x0,
                   const std::function<Var(double)>& deriv_at, const std::vector<double>& times,
                   double step, Mode mode, Rng& noise_rng) {
    ncde::NoiseDraw noise = (layer.core.variant == Variant::VAE && mode == Mode::Train)
                                ? ncde::NoiseDraw::gaussian(cfg.latent_dim, noise_rng)
                                : ncde::NoiseDraw::zero(cfg.latent_dim);
    ncde::AugmentedVars state0 = ncde::initial_state(t, layer.core, x0);
    std::vector<ncde::AugmentedVars> states =
        ncde::euler_solve(t, layer.core, state0, deriv_at, noise, step, times, cfg.method);

    LayerRun run;
    run.heads.reserve(states.size());
    run.decs.reserve(states.size());
    for (const ncde::AugmentedVars& st : states) {
        run.heads.push_back(layer.head.apply(t, st.dec));
        run.decs.push_back(st.dec);
    }
    if (states.back().kld) run.kld = *states.back().kld;
    return run;
}

// One knot-value vector per channel, gathered from the per-time columns.
std::vector<Var> knots_by_channel(const std::vector<Var>& cols, std::size_t channels) {
    std::vector<Var> knots(channels);
    for (std::size_t c = 0; c < channels; ++c) {
        Var acc = ad::slice(cols[0], c, 1);
        for (std::size_t i = 1; i < cols.size(); ++i)
            acc = ad::concat(acc, ad::slice(cols[i], c, 1));
        knots[c] = acc;
    }
    return knots;
}

}  // namespace

ChainVars chain_forward(Tape& t, const Chain& chain, const TimeSeriesSample& sample, Mode mode,
                        Rng& noise_rng) {
    const ChainConfig& cfg = chain.cfg;
    if (sample.channels() != cfg.channels)
        throw ShapeError("chain_forward: sample has " + std::to_string(sample.channels()) +
                         " channels, model expects " + std::to_string(cfg.channels));
    const std::size_t n = sample.n_times();
    const std::size_t dx = cfg.channels;
    if (n == 0) throw ShapeError("chain_forward: sample has no timestamps");
    const std::vector<double>& times = sample.times;
    const double step = chain.effective_step(n);

    ChainVars out;

    // Layer 1 is driven by the fixed interpolant through the visible cells.
    spline::ControlPath path = spline::build_control_path(sample);
    auto const_deriv = [&t, &path](double tt) { return t.leaf(path.derivative(tt)); };
    Var x0 = t.leaf(path.value(times.front()));
    LayerRun first =
        run_layer(t, chain.layers[0], cfg, x0, const_deriv, times, step, mode, noise_rng);
    out.xhat = first.heads;
    if (first.kld) out.kld.push_back(*first.kld);

    if (chain.layers.size() == 1) {
        out.xtilde = out.xhat;
        return out;
    }

    // Constants for the nan-replace update: the visible part of the input
    // (hidden cells zeroed) and the complementary 0/1 mask.
    std::vector<Var> vis_part(n), hid_mask(n), vis_mask(n);
    for (std::size_t i = 0; i < n; ++i) {
        Array vp(Shape{dx}, 0.0), hm(Shape{dx}, 0.0), vm(Shape{dx}, 0.0);
        for (std::size_t c = 0; c < dx; ++c) {
            if (sample.visible(c, i)) {
                vp.data[c] = sample.values.at(c, i);
                vm.data[c] = 1.0;
            } else {
                hm.data[c] = 1.0;
            }
        }
        vis_part[i] = t.leaf(vp);
        hid_mask[i] = t.leaf(hm);
        vis_mask[i] = t.leaf(vm);
    }

    // The knot times never change across layers, so the interpolation weights
    // are fixed numbers; only the knot values carry gradient.
    std::optional<spline::SplineWeights> weights;
    if (n > 1) weights = spline::build_spline_weights(times);

    auto nan_replace_cols = [&](const std::vector<Var>& pred) {
        std::vector<Var> cols(n);
        for (std::size_t i = 0; i < n; ++i)
            cols[i] = ad::add(vis_part[i], ad::mul(hid_mask[i], pred[i]));
        return cols;
    };

    std::vector<Var> check_cols = nan_replace_cols(out.xhat);
    out.xcheck = check_cols;

    LayerRun last;
    std::vector<Var> prev_pred;  // residual output of the previous deep layer
    for (std::size_t li = 1; li < chain.layers.size(); ++li) {
        if (li >= 2) check_cols = nan_replace_cols(prev_pred);
        std::vector<Var> knots = knots_by_channel(check_cols, dx);
        auto tape_deriv = [&t, &weights, knots, dx, n](double tt) -> Var {
            if (n == 1) return t.leaf(Array(Shape{dx}, 0.0));
            Array row(Shape{1, n}, 0.0);
            weights->derivative_row(tt, row.data.data());
            Var row_leaf = t.leaf(row);
            Var acc = ad::matmul(row_leaf, knots[0]);
            for (std::size_t c = 1; c < dx; ++c)
                acc = ad::concat(acc, ad::matmul(row_leaf, knots[c]));
            return acc;
        };
        LayerRun run = run_layer(t, chain.layers[li], cfg, check_cols[0], tape_deriv, times, step,
                                 mode, noise_rng);
        if (run.kld) out.kld.push_back(*run.kld);
        // Residual connection onto the nan-replaced input of this layer.
        std::vector<Var> resid(n);
        for (std::size_t i = 0; i < n; ++i) resid[i] = ad::add(run.heads[i], check_cols[i]);
        run.heads = resid;
        prev_pred = resid;
        last = run;
    }
    out.xhat_prime = last.heads;

    // Fusion gate on the final decoder state blends the shallow and deep
    // reconstructions per channel.
    const ncde::Affine& fc3 = *chain.layers.back().fc3;
    Var ones = t.leaf(Array(Shape{dx}, 1.0));
    out.alpha.resize(n);
    out.xtilde.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        Var gin = cfg.masked_alpha ? ad::concat(last.decs[i], vis_mask[i]) : last.decs[i];
        Var a = ad::sigmoid(fc3.forward(t, gin));
        out.alpha[i] = a;
        out.xtilde[i] =
            ad::add(ad::mul(a, out.xhat[i]), ad::mul(ad::sub(ones, a), out.xhat_prime[i]));
    }
    return out;
}

namespace {

Array pack_columns(const Tape& t, const std::vector<Var>& cols, std::size_t channels,
                   std::size_t n_times) {
    if (cols.empty()) return Array{};
    Array m(Shape{channels, n_times}, 0.0);
    for (std::size_t i = 0; i < n_times; ++i) {
        const Array& v = t.val(cols[i]);
        for (std::size_t c = 0; c < channels; ++c) m.at(c, i) = v.data[c];
    }
    return m;
}

}  // namespace

ImputationResult detach(const Tape& t, const ChainVars& v, std::size_t channels,
                        std::size_t n_times) {
    ImputationResult r;
    r.xhat = pack_columns(t, v.xhat, channels, n_times);
    r.xcheck = pack_columns(t, v.xcheck, channels, n_times);
    r.xhat_prime = pack_columns(t, v.xhat_prime, channels, n_times);
    r.xtilde = pack_columns(t, v.xtilde, channels, n_times);
    r.alpha = pack_columns(t, v.alpha, channels, n_times);
    for (const Var& k : v.kld) r.kld_integrals.push_back(t.val(k).data[0]);
    return r;
}

ImputationResult forward_numeric(const Chain& chain, const TimeSeriesSample& sample, Mode mode,
                                 std::uint64_t noise_seed) {
    Tape t;
    Rng rng(noise_seed);
    ChainVars v = chain_forward(t, chain, sample, mode, rng);
    return detach(t, v, sample.channels(), sample.n_times());
}

Array nan_replace(const Array& values, const Array& predictions) {
    if (!values.same_shape(predictions))
        throw ShapeError("nan_replace: shape mismatch " + ad::shape_str(values.shape) + " vs " +
                         ad::shape_str(predictions.shape));
    Array out = values;
    for (std::size_t i = 0; i < out.numel(); ++i)
        if (std::isnan(out.data[i])) out.data[i] = predictions.data[i];
    return out;
}

Array impute(const Chain& chain, const TimeSeriesSample& sample, std::uint64_t seed) {
    ImputationResult r = forward_numeric(chain, sample, Mode::Infer, seed);
    return nan_replace(sample.values, r.xtilde);
}

}  // namespace cta::model
