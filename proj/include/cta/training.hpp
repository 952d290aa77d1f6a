#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "cta/data.hpp"
#include "cta/model.hpp"

namespace cta::train {

// Supervision masks for one training step. `supervised` marks the cells whose
// values the model may be scored on (visible before intentional masking);
// `intentional` is the subset hidden from this forward pass but still scored
// against ground truth.
struct MaskSet {
    MaskGrid supervised;
    MaskGrid intentional;
};

// Uniformly picks floor(ratio * count) cells of `candidates` without
// replacement.
MaskGrid sample_intentional_mask(const MaskGrid& candidates, double ratio, Rng& rng);

// Loss built on the tape. Each reconstruction term is a Frobenius norm over
// its mask, divided by the number of active cells when `normalize_terms` is
// set; a term whose mask is empty contributes an exact constant zero.
struct LossVars {
    ad::Var recon_tilde, recon_hat, recon_hat_prime, recon_masked, kld, total;
};

struct LossBreakdown {
    double recon_tilde = 0, recon_hat = 0, recon_hat_prime = 0, recon_masked = 0, kld = 0,
           total = 0;
};

LossVars loss_vars(ad::Tape& t, const model::ChainVars& v, const ad::Array& truth,
                   const MaskSet& masks, double kld_weight, bool normalize_terms);
LossBreakdown read_loss(const ad::Tape& t, const LossVars& lv);

struct TrainConfig {
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::size_t batch = 8;
    long max_iter = 400;
    double mask_ratio = 0.2;   // intentional-mask fraction per step
    double kld_weight = 1.0;
    bool normalize_terms = true;
    long val_every = 25;
    std::uint64_t seed = 1;
    bool verbose = false;  // progress lines on stderr
};

struct HistoryRow {
    long iter = 0;
    LossBreakdown loss;
    bool has_val = false;
    double val_mae = 0.0;
};

struct TrainResult {
    std::vector<HistoryRow> history;
    double best_val_mae = std::numeric_limits<double>::infinity();
    long best_iter = -1;
    std::vector<ad::Array> best_params;
    long iters_run = 0;
};

// Minibatch training with Adam. Validation cells are drawn once up front and
// held fixed; the parameters with the best validation error are restored into
// the chain before returning (the final parameters, when there is no
// validation split). Divergence aborts with the iteration and the last finite
// loss in the message. Fully deterministic for a given seed.
TrainResult train(model::Chain& chain, const data::Dataset& ds, const TrainConfig& cfg);

// history CSV: iter,total,recon_tilde,recon_hat,recon_hat_prime,recon_masked,
// kld,val_mae (val_mae empty on rows without a validation pass).
void write_history_csv(const std::vector<HistoryRow>& rows, const std::string& path);

}  // namespace cta::train
