#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cta/ncde.hpp"
#include "cta/sample.hpp"

namespace cta::model {

using ncde::Variant;

enum class Mode { Train, Infer };  // Infer forces eps = 0 everywhere

struct ChainConfig {
    std::size_t channels = 0;
    std::vector<Variant> chain;     // 1..3 encoder/decoder layers
    std::size_t latent_dim = 8;     // state size of mu (and sigma)
    std::size_t decoder_dim = 8;
    std::size_t field_hidden = 32;  // hidden width of the field MLPs
    std::size_t field_layers = 1;   // number of hidden layers
    std::size_t head_hidden = 32;   // hidden width of the output head
    double step = 0.0;              // solver step; 0 -> 1/(4 * intervals)
    bool time_feature = false;      // append t to the encoder field input
    bool masked_alpha = false;      // append the visibility column to the gate input
    ncde::SolveMethod method = ncde::SolveMethod::Euler;
};

std::vector<Variant> parse_chain_spec(const std::string& spec);  // e.g. "VAE-AE"
std::string chain_spec_str(const std::vector<Variant>& chain);

// Readout x_hat(t_i) = FC2(ELU(FC1(d(t_i)))).
struct OutputHead {
    ncde::Affine fc1, fc2;

    static OutputHead create(ad::ParamStore& store, const std::string& prefix,
                             std::size_t channels, std::size_t decoder_dim,
                             std::size_t hidden, Rng& rng);
    ad::Var apply(ad::Tape& t, ad::Var dec) const;
};

struct Layer {
    ncde::LayerCore core;
    OutputHead head;
    std::optional<ncde::Affine> fc3;  // fusion gate, final layer of a multi-layer chain
};

// A full model: every parameter lives in `store` in creation order.
struct Chain {
    ChainConfig cfg;
    ad::ParamStore store;
    std::vector<Layer> layers;

    Chain() = default;
    Chain(const Chain&) = delete;
    Chain& operator=(const Chain&) = delete;
    Chain(Chain&&) = default;
    Chain& operator=(Chain&&) = default;

    static Chain create(ChainConfig cfg, std::uint64_t seed);

    double effective_step(std::size_t n_times) const;
};

// On-tape forward results, one Var of shape {channels} per observation time.
struct ChainVars {
    std::vector<ad::Var> xhat;        // first layer reconstruction
    std::vector<ad::Var> xcheck;      // nan-replaced input handed to layer 2
    std::vector<ad::Var> xhat_prime;  // last layer residual output (multi-layer only)
    std::vector<ad::Var> xtilde;      // fused output (== xhat for single layer)
    std::vector<ad::Var> alpha;       // fusion gate (multi-layer only)
    std::vector<ad::Var> kld;         // xi(T) per VAE layer
};

// Runs every layer of the chain over one sample on the given tape. In Train
// mode each VAE layer draws its eps from `noise_rng`; Infer mode uses eps = 0
// and never touches the rng.
ChainVars chain_forward(ad::Tape& t, const Chain& chain, const TimeSeriesSample& sample,
                        Mode mode, Rng& noise_rng);

// Numeric snapshot of a forward pass ({channels, n} matrices).
struct ImputationResult {
    ad::Array xhat, xcheck, xhat_prime, xtilde, alpha;
    std::vector<double> kld_integrals;
};

ImputationResult detach(const ad::Tape& t, const ChainVars& v, std::size_t channels,
                        std::size_t n_times);

ImputationResult forward_numeric(const Chain& chain, const TimeSeriesSample& sample, Mode mode,
                                 std::uint64_t noise_seed);

// X_check = values where visible, predictions where hidden (NaN).
ad::Array nan_replace(const ad::Array& values, const ad::Array& predictions);

// Completed matrix: visible cells pass through unchanged, hidden cells take
// the fused reconstruction (inference mode, so the result is seed-independent).
ad::Array impute(const Chain& chain, const TimeSeriesSample& sample, std::uint64_t seed);

}  // namespace cta::model
