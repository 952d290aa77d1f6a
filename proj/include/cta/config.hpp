#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cta/data.hpp"
#include "cta/model.hpp"
#include "cta/training.hpp"

namespace cta::config {

// Every runtime knob, serialized as "key = value" lines. The same text lives
// in config files, in `print-config` output, and inside checkpoints.
struct RunConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "out";

    std::string data_source = "synthetic";  // "synthetic" or "csv"
    std::string data_csv_path;
    std::size_t data_window = 100;  // rows per sample when loading csv (0 = all)
    std::size_t data_channels = 4;
    std::size_t data_length = 100;
    std::size_t data_samples = 200;
    double data_irregularity = 0.3;
    double data_noise = 0.05;
    double data_damping = 0.2;
    double data_phase_jitter = 3.14159265358979323846;
    double data_train_frac = 0.7;
    double data_val_frac = 0.1;
    double data_missing_rate = 0.7;

    std::string model_chain = "AE-AE";
    std::size_t model_latent_dim = 8;
    std::size_t model_decoder_dim = 8;
    std::size_t model_field_hidden = 32;
    std::size_t model_field_layers = 1;
    std::size_t model_head_hidden = 32;
    bool model_time_feature = false;
    bool model_masked_alpha = false;

    double solver_step = 0.0;  // 0 = pick from the observation spacing
    std::string solver_method = "euler";  // "euler" or "rk4"

    double train_lr = 1e-3;
    double train_beta1 = 0.9;
    double train_beta2 = 0.999;
    double train_eps = 1e-8;
    std::size_t train_batch = 8;
    long train_max_iter = 400;
    double train_mask_ratio = 0.2;
    double train_kld_weight = 1.0;
    bool train_normalize_terms = true;
    long train_val_every = 25;

    std::string bench_methods = "AE-AE,VAE-AE,spline,mean";
    std::string bench_rates = "0.3,0.5,0.7";
    int bench_trials = 5;

    // Channel statistics captured at training time so a checkpoint can map new
    // data into model units. Empty until training fills them.
    std::vector<double> norm_mean, norm_std;
};

RunConfig default_config();

// Applies one key/value pair; unknown keys and malformed values raise
// ConfigError naming the key.
void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value);

// `origin` names the source (file path or "<builtin>") in error messages.
RunConfig parse_config_text(const std::string& text, const std::string& origin);
RunConfig load_config(const std::string& path);

// Canonical listing of every key; parse_config_text() of it reproduces the
// struct exactly, doubles included.
std::string config_text(const RunConfig& cfg);

// --- projections into the module-level configs ---
model::ChainConfig chain_config(const RunConfig& cfg, std::size_t channels);
train::TrainConfig train_config(const RunConfig& cfg);
data::SyntheticConfig synthetic_config(const RunConfig& cfg);

std::vector<std::string> split_list(const std::string& csv);  // comma-separated, trimmed
std::vector<double> parse_rate_list(const std::string& csv);

}  // namespace cta::config
