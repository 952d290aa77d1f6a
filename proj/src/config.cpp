#include "cta/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "cta/errors.hpp"

namespace cta::config {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
    const char* s = v.c_str();
    char* end = nullptr;
    double x = std::strtod(s, &end);
    if (end == s || *end != '\0')
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    return x;
}

long to_long(const std::string& key, const std::string& v) {
    const char* s = v.c_str();
    char* end = nullptr;
    long x = std::strtol(s, &end, 10);
    if (end == s || *end != '\0')
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return x;
}

std::size_t to_size(const std::string& key, const std::string& v) {
    long x = to_long(key, v);
    if (x < 0) throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
    return static_cast<std::size_t>(x);
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    const char* s = v.c_str();
    char* end = nullptr;
    unsigned long long x = std::strtoull(s, &end, 10);
    if (end == s || *end != '\0')
        throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
    return x;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_list(const std::vector<double>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ',';
        out += fmt_double(xs[i]);
    }
    return out;
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const std::string& tok : split_list(v)) out.push_back(to_double(key, tok));
    return out;
}

struct KeyHandler {
    const char* key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

const std::vector<KeyHandler>& handlers() {
    static const std::vector<KeyHandler> table = {
        {"seed", [](RunConfig& c, const std::string& v) { c.seed = to_u64("seed", v); },
         [](const RunConfig& c) { return std::to_string(c.seed); }},
        {"out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; },
         [](const RunConfig& c) { return c.out_dir; }},
        {"data.source",
         [](RunConfig& c, const std::string& v) {
             if (v != "synthetic" && v != "csv")
                 throw ConfigError("data.source: expected 'synthetic' or 'csv', got '" + v + "'");
             c.data_source = v;
         },
         [](const RunConfig& c) { return c.data_source; }},
        {"data.csv_path", [](RunConfig& c, const std::string& v) { c.data_csv_path = v; },
         [](const RunConfig& c) { return c.data_csv_path; }},
        {"data.window",
         [](RunConfig& c, const std::string& v) { c.data_window = to_size("data.window", v); },
         [](const RunConfig& c) { return std::to_string(c.data_window); }},
        {"data.channels",
         [](RunConfig& c, const std::string& v) { c.data_channels = to_size("data.channels", v); },
         [](const RunConfig& c) { return std::to_string(c.data_channels); }},
        {"data.length",
         [](RunConfig& c, const std::string& v) { c.data_length = to_size("data.length", v); },
         [](const RunConfig& c) { return std::to_string(c.data_length); }},
        {"data.samples",
         [](RunConfig& c, const std::string& v) { c.data_samples = to_size("data.samples", v); },
         [](const RunConfig& c) { return std::to_string(c.data_samples); }},
        {"data.irregularity",
         [](RunConfig& c, const std::string& v) {
             c.data_irregularity = to_double("data.irregularity", v);
         },
         [](const RunConfig& c) { return fmt_double(c.data_irregularity); }},
        {"data.noise",
         [](RunConfig& c, const std::string& v) { c.data_noise = to_double("data.noise", v); },
         [](const RunConfig& c) { return fmt_double(c.data_noise); }},
        {"data.damping",
         [](RunConfig& c, const std::string& v) { c.data_damping = to_double("data.damping", v); },
         [](const RunConfig& c) { return fmt_double(c.data_damping); }},
        {"data.phase_jitter",
         [](RunConfig& c, const std::string& v) {
             c.data_phase_jitter = to_double("data.phase_jitter", v);
         },
         [](const RunConfig& c) { return fmt_double(c.data_phase_jitter); }},
        {"data.train_frac",
         [](RunConfig& c, const std::string& v) {
             c.data_train_frac = to_double("data.train_frac", v);
         },
         [](const RunConfig& c) { return fmt_double(c.data_train_frac); }},
        {"data.val_frac",
         [](RunConfig& c, const std::string& v) {
             c.data_val_frac = to_double("data.val_frac", v);
         },
         [](const RunConfig& c) { return fmt_double(c.data_val_frac); }},
        {"data.missing_rate",
         [](RunConfig& c, const std::string& v) {
             c.data_missing_rate = to_double("data.missing_rate", v);
         },
         [](const RunConfig& c) { return fmt_double(c.data_missing_rate); }},
        {"model.chain",
         [](RunConfig& c, const std::string& v) {
             model::parse_chain_spec(v);  // validate
             c.model_chain = v;
         },
         [](const RunConfig& c) { return c.model_chain; }},
        {"model.latent_dim",
         [](RunConfig& c, const std::string& v) {
             c.model_latent_dim = to_size("model.latent_dim", v);
         },
         [](const RunConfig& c) { return std::to_string(c.model_latent_dim); }},
        {"model.decoder_dim",
         [](RunConfig& c, const std::string& v) {
             c.model_decoder_dim = to_size("model.decoder_dim", v);
         },
         [](const RunConfig& c) { return std::to_string(c.model_decoder_dim); }},
        {"model.field_hidden",
         [](RunConfig& c, const std::string& v) {
             c.model_field_hidden = to_size("model.field_hidden", v);
         },
         [](const RunConfig& c) { return std::to_string(c.model_field_hidden); }},
        {"model.field_layers",
         [](RunConfig& c, const std::string& v) {
             c.model_field_layers = to_size("model.field_layers", v);
         },
         [](const RunConfig& c) { return std::to_string(c.model_field_layers); }},
        {"model.head_hidden",
         [](RunConfig& c, const std::string& v) {
             c.model_head_hidden = to_size("model.head_hidden", v);
         },
         [](const RunConfig& c) { return std::to_string(c.model_head_hidden); }},
        {"model.time_feature",
         [](RunConfig& c, const std::string& v) {
             c.model_time_feature = to_bool("model.time_feature", v);
         },
         [](const RunConfig& c) { return c.model_time_feature ? "true" : "false"; }},
        {"model.masked_alpha",
         [](RunConfig& c, const std::string& v) {
             c.model_masked_alpha = to_bool("model.masked_alpha", v);
         },
         [](const RunConfig& c) { return c.model_masked_alpha ? "true" : "false"; }},
        {"solver.step",
         [](RunConfig& c, const std::string& v) { c.solver_step = to_double("solver.step", v); },
         [](const RunConfig& c) { return fmt_double(c.solver_step); }},
        {"solver.method",
         [](RunConfig& c, const std::string& v) {
             if (v != "euler" && v != "rk4")
                 throw ConfigError("solver.method: expected 'euler' or 'rk4', got '" + v + "'");
             c.solver_method = v;
         },
         [](const RunConfig& c) { return c.solver_method; }},
        {"train.lr",
         [](RunConfig& c, const std::string& v) { c.train_lr = to_double("train.lr", v); },
         [](const RunConfig& c) { return fmt_double(c.train_lr); }},
        {"train.beta1",
         [](RunConfig& c, const std::string& v) { c.train_beta1 = to_double("train.beta1", v); },
         [](const RunConfig& c) { return fmt_double(c.train_beta1); }},
        {"train.beta2",
         [](RunConfig& c, const std::string& v) { c.train_beta2 = to_double("train.beta2", v); },
         [](const RunConfig& c) { return fmt_double(c.train_beta2); }},
        {"train.eps",
         [](RunConfig& c, const std::string& v) { c.train_eps = to_double("train.eps", v); },
         [](const RunConfig& c) { return fmt_double(c.train_eps); }},
        {"train.batch",
         [](RunConfig& c, const std::string& v) { c.train_batch = to_size("train.batch", v); },
         [](const RunConfig& c) { return std::to_string(c.train_batch); }},
        {"train.max_iter",
         [](RunConfig& c, const std::string& v) {
             c.train_max_iter = to_long("train.max_iter", v);
         },
         [](const RunConfig& c) { return std::to_string(c.train_max_iter); }},
        {"train.mask_ratio",
         [](RunConfig& c, const std::string& v) {
             c.train_mask_ratio = to_double("train.mask_ratio", v);
         },
         [](const RunConfig& c) { return fmt_double(c.train_mask_ratio); }},
        {"train.kld_weight",
         [](RunConfig& c, const std::string& v) {
             c.train_kld_weight = to_double("train.kld_weight", v);
         },
         [](const RunConfig& c) { return fmt_double(c.train_kld_weight); }},
        {"train.normalize_terms",
         [](RunConfig& c, const std::string& v) {
             c.train_normalize_terms = to_bool("train.normalize_terms", v);
         },
         [](const RunConfig& c) { return c.train_normalize_terms ? "true" : "false"; }},
        {"train.val_every",
         [](RunConfig& c, const std::string& v) {
             c.train_val_every = to_long("train.val_every", v);
             if (c.train_val_every < 1)
                 throw ConfigError("train.val_every: must be at least 1");
         },
         [](const RunConfig& c) { return std::to_string(c.train_val_every); }},
        {"bench.methods", [](RunConfig& c, const std::string& v) { c.bench_methods = v; },
         [](const RunConfig& c) { return c.bench_methods; }},
        {"bench.rates", [](RunConfig& c, const std::string& v) { c.bench_rates = v; },
         [](const RunConfig& c) { return c.bench_rates; }},
        {"bench.trials",
         [](RunConfig& c, const std::string& v) {
             c.bench_trials = static_cast<int>(to_long("bench.trials", v));
         },
         [](const RunConfig& c) { return std::to_string(c.bench_trials); }},
        {"norm.mean",
         [](RunConfig& c, const std::string& v) { c.norm_mean = to_list("norm.mean", v); },
         [](const RunConfig& c) { return fmt_list(c.norm_mean); }},
        {"norm.std",
         [](RunConfig& c, const std::string& v) { c.norm_std = to_list("norm.std", v); },
         [](const RunConfig& c) { return fmt_list(c.norm_std); }},
    };
    return table;
}

}  // namespace

RunConfig default_config() { return RunConfig{}; }

void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const KeyHandler& h : handlers()) {
        if (key == h.key) {
            h.set(cfg, value);
            return;
        }
    }
    throw ConfigError("unknown configuration key '" + key + "'");
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected 'key = value', got '" + t + "'");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        try {
            apply_kv(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

std::string config_text(const RunConfig& cfg) {
    std::ostringstream out;
    for (const KeyHandler& h : handlers()) out << h.key << " = " << h.get(cfg) << "\n";
    return out.str();
}

model::ChainConfig chain_config(const RunConfig& cfg, std::size_t channels) {
    model::ChainConfig mc;
    mc.channels = channels;
    mc.chain = model::parse_chain_spec(cfg.model_chain);
    mc.latent_dim = cfg.model_latent_dim;
    mc.decoder_dim = cfg.model_decoder_dim;
    mc.field_hidden = cfg.model_field_hidden;
    mc.field_layers = cfg.model_field_layers;
    mc.head_hidden = cfg.model_head_hidden;
    mc.time_feature = cfg.model_time_feature;
    mc.masked_alpha = cfg.model_masked_alpha;
    mc.step = cfg.solver_step;
    mc.method = cfg.solver_method == "rk4" ? ncde::SolveMethod::RK4 : ncde::SolveMethod::Euler;
    return mc;
}

train::TrainConfig train_config(const RunConfig& cfg) {
    train::TrainConfig tc;
    tc.lr = cfg.train_lr;
    tc.beta1 = cfg.train_beta1;
    tc.beta2 = cfg.train_beta2;
    tc.eps = cfg.train_eps;
    tc.batch = cfg.train_batch;
    tc.max_iter = cfg.train_max_iter;
    tc.mask_ratio = cfg.train_mask_ratio;
    tc.kld_weight = cfg.train_kld_weight;
    tc.normalize_terms = cfg.train_normalize_terms;
    tc.val_every = cfg.train_val_every;
    tc.seed = derive_seed(cfg.seed, 4);
    return tc;
}

data::SyntheticConfig synthetic_config(const RunConfig& cfg) {
    data::SyntheticConfig sc;
    sc.channels = cfg.data_channels;
    sc.length = cfg.data_length;
    sc.samples = cfg.data_samples;
    sc.irregularity = cfg.data_irregularity;
    sc.noise = cfg.data_noise;
    sc.damping = cfg.data_damping;
    sc.phase_jitter = cfg.data_phase_jitter;
    sc.seed = derive_seed(cfg.seed, 1);
    return sc;
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const std::string t = trim(tok);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

std::vector<double> parse_rate_list(const std::string& csv) {
    std::vector<double> out;
    for (const std::string& tok : split_list(csv)) {
        double r = to_double("rate", tok);
        if (r < 0.0 || r > 1.0)
            throw ConfigError("rate '" + tok + "' must lie in [0, 1]");
        out.push_back(r);
    }
    return out;
}

}  // namespace cta::config
