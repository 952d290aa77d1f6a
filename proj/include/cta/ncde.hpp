#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "cta/optim.hpp"
#include "cta/spline.hpp"
#include "cta/tape.hpp"

namespace cta::ncde {

enum class Variant { AE, VAE };
enum class SolveMethod { Euler, RK4 };

// Vector-field MLP: `n_hidden` SiLU layers of width `hidden`, then a final
// affine layer squashed by tanh and reshaped to a {out_rows, out_cols} matrix
// that multiplies the control derivative.
struct FieldNet {
    std::vector<ad::Param*> w, b;
    std::size_t in_dim = 0, hidden = 0, out_rows = 0, out_cols = 0;

    static FieldNet create(ad::ParamStore& store, const std::string& name, std::size_t in_dim,
                           std::size_t hidden, std::size_t n_hidden, std::size_t out_rows,
                           std::size_t out_cols, Rng& rng);

    ad::Var forward(ad::Tape& t, ad::Var input) const;  // -> {out_rows, out_cols}
};

// Affine map y = W x + b.
struct Affine {
    ad::Param* w = nullptr;
    ad::Param* b = nullptr;

    static Affine create(ad::ParamStore& store, const std::string& name, std::size_t out_dim,
                         std::size_t in_dim, Rng& rng);

    ad::Var forward(ad::Tape& t, ad::Var x) const;
};

// Field networks and initial-condition maps of one encoder/decoder layer.
// sigma machinery exists only for the VAE variant.
struct LayerCore {
    Variant variant = Variant::AE;
    std::size_t latent_dim = 0, decoder_dim = 0, control_dim = 0;
    bool time_feature = false;  // append t to the encoder field input
    FieldNet g_mu;
    std::optional<FieldNet> g_sigma;
    FieldNet k;
    Affine fc_mu;
    std::optional<Affine> fc_sigma;
    Affine fc_d;

    static LayerCore create(ad::ParamStore& store, const std::string& prefix, Variant variant,
                            std::size_t control_dim, std::size_t latent_dim,
                            std::size_t decoder_dim, std::size_t hidden, std::size_t n_hidden,
                            bool time_feature, Rng& rng);
};

// Encoder/decoder state carried through the solve. sigma and kld are only
// populated for VAE layers; kld accumulates the pointwise divergence density
//   0.5 * sum_j(exp(2 sigma_j) + mu_j^2 - 1 - 2 sigma_j)
// along the solve, so it is nonnegative and nondecreasing.
struct AugmentedVars {
    ad::Var mu;
    std::optional<ad::Var> sigma;
    ad::Var dec;
    std::optional<ad::Var> kld;
};

// epsilon for the reparameterized hidden path; zero() gives inference mode.
struct NoiseDraw {
    std::vector<double> epsilon;

    static NoiseDraw zero(std::size_t dim) { return NoiseDraw{std::vector<double>(dim, 0.0)}; }
    static NoiseDraw gaussian(std::size_t dim, Rng& rng);
};

// H(t) = mu + eps .* exp(sigma) for VAE (sigma is the log-std); H = mu for AE.
ad::Var hidden_path_value(ad::Tape& t, const AugmentedVars& state, const NoiseDraw& noise,
                          Variant variant);

// Initial condition from the path value at t0: mu = FC_mu(x0), sigma =
// FC_sigma(x0) (VAE), dec = FC_d(x0), kld = 0.
AugmentedVars initial_state(ad::Tape& t, const LayerCore& core, ad::Var x0);

// Stacked right-hand side at time `t`:
//   d mu    = g_mu(e)    . dX
//   d sigma = g_sigma(e) . dX                       (VAE)
//   d dec   = k(dec) . (d mu + eps.*exp(sigma).*d sigma)
//   d kld   = divergence density                    (VAE)
// where e = mu (AE) or concat(mu, sigma) (VAE), optionally with t appended.
AugmentedVars augmented_rhs(ad::Tape& t, const LayerCore& core, const AugmentedVars& state,
                            ad::Var path_deriv, const NoiseDraw& noise, double time);

// --- generic fixed-step solver core ---

// Step times from t0 to t1 on a fixed grid of size `step`, with shortened
// substeps so that every output time is landed on exactly. `output_at[k]` is
// the index into `times` of the k-th requested output.
struct Schedule {
    std::vector<double> times;
    std::vector<std::size_t> output_at;
};

Schedule build_schedule(double t0, double t1, double step, const std::vector<double>& outputs);

using Rhs = std::function<std::vector<ad::Var>(double t, const std::vector<ad::Var>& state)>;

// Explicit solve over the schedule; returns the state at every output time.
// Throws DivergenceError when a state stops being finite.
std::vector<std::vector<ad::Var>> solve_fixed_step(ad::Tape& t, std::vector<ad::Var> state0,
                                                   const Rhs& rhs, const Schedule& schedule,
                                                   SolveMethod method);

// NCDE solve of the augmented system driven by a precomputed control path.
// Returns the augmented state at each requested output time.
std::vector<AugmentedVars> euler_solve(ad::Tape& t, const LayerCore& core,
                                       const AugmentedVars& state0,
                                       const std::function<ad::Var(double)>& path_deriv_at,
                                       const NoiseDraw& noise, double step,
                                       const std::vector<double>& output_times,
                                       SolveMethod method = SolveMethod::Euler);

}  // namespace cta::ncde
