#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cta/checkpoint.hpp"
#include "cta/config.hpp"
#include "cta/data.hpp"
#include "cta/errors.hpp"
#include "cta/evaluation.hpp"
#include "cta/model.hpp"
#include "cta/training.hpp"

namespace fs = std::filesystem;
using namespace cta;

namespace {

// Missing input files exit with code 2 (vs. 1 for every other failure).
struct MissingFileError : Error {
    using Error::Error;
};

void require_file(const std::string& path, const std::string& what) {
    if (!fs::exists(path)) throw MissingFileError("cannot open " + what + ": " + path);
}

std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string trimmed(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool is_number(const std::string& field) {
    const char* s = field.c_str();
    char* end = nullptr;
    (void)std::strtod(s, &end);
    if (end == s) return false;
    while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
    return *end == '\0';
}

struct CommonFlags {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
};

config::RunConfig resolve_config(const CommonFlags& flags) {
    config::RunConfig cfg;
    if (!flags.config_path.empty()) {
        require_file(flags.config_path, "config file");
        cfg = config::load_config(flags.config_path);
    }
    if (flags.seed_set) cfg.seed = flags.seed;
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    return cfg;
}

data::Dataset build_dataset(const config::RunConfig& cfg) {
    if (cfg.data_source == "csv") {
        if (cfg.data_csv_path.empty())
            throw ConfigError("data.source = csv requires data.csv_path");
        require_file(cfg.data_csv_path, "data file");
        return data::load_csv(cfg.data_csv_path, cfg.data_window);
    }
    return data::make_synthetic(config::synthetic_config(cfg));
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << text;
}

int cmd_train(const CommonFlags& flags, bool verbose) {
    config::RunConfig cfg = resolve_config(flags);
    data::Dataset ds = build_dataset(cfg);
    data::assign_splits(ds, cfg.data_train_frac, cfg.data_val_frac, cfg.seed);
    data::apply_missing(ds, cfg.data_missing_rate, derive_seed(cfg.seed, 2));
    data::normalize(ds);

    model::Chain chain =
        model::Chain::create(config::chain_config(cfg, ds.channels()), derive_seed(cfg.seed, 3));
    train::TrainConfig tc = config::train_config(cfg);
    tc.verbose = verbose;
    const train::TrainResult result = train::train(chain, ds, tc);

    cfg.norm_mean = ds.channel_mean;
    cfg.norm_std = ds.channel_std;
    const std::string text = config::config_text(cfg);

    fs::create_directories(cfg.out_dir);
    const std::string ckpt = (fs::path(cfg.out_dir) / "model.ckpt").string();
    const std::string hist = (fs::path(cfg.out_dir) / "history.csv").string();
    const std::string echo = (fs::path(cfg.out_dir) / "config.txt").string();
    checkpoint::save_checkpoint(ckpt, text, chain.store);
    train::write_history_csv(result.history, hist);
    write_text_file(echo, text);

    std::cout << "trained " << cfg.model_chain << " for " << result.iters_run
              << " iterations on " << ds.size() << " samples ("
              << ds.indices(data::Split::Train).size() << " train / "
              << ds.indices(data::Split::Val).size() << " val / "
              << ds.indices(data::Split::Test).size() << " test)\n";
    if (result.best_iter >= 0)
        std::cout << "best validation MAE " << result.best_val_mae << " at iteration "
                  << result.best_iter << "\n";
    std::cout << "wrote " << ckpt << "\n"
              << "wrote " << hist << "\n"
              << "wrote " << echo << "\n";
    return 0;
}

// Rewrites the input CSV with the originally missing cells filled in,
// leaving every other byte untouched.
void write_completed_csv(const std::string& input, const std::string& output,
                         const std::vector<MaskGrid>& visible,
                         const std::vector<TimeSeriesSample>& samples,
                         const std::vector<ad::Array>& filled) {
    std::ifstream in(input, std::ios::binary);
    if (!in) throw Error("cannot open data file: " + input);
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::ofstream out(output, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + output);

    bool saw_content = false;
    std::size_t si = 0, ti = 0;
    std::size_t pos = 0;
    while (pos <= all.size()) {
        const std::size_t nl = all.find('\n', pos);
        const bool terminated = nl != std::string::npos;
        if (!terminated && pos == all.size()) break;  // no trailing fragment
        std::string line = all.substr(pos, (terminated ? nl : all.size()) - pos);
        pos = terminated ? nl + 1 : all.size() + 1;
        std::string eol = terminated ? "\n" : "";
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
            eol = terminated ? "\r\n" : "\r";
        }

        const std::string t = trimmed(line);
        const bool content = !t.empty() && t[0] != '#';
        bool is_data = false;
        if (content) {
            if (saw_content) {
                is_data = true;
            } else {
                const std::string head = trimmed(line.substr(0, line.find(',')));
                is_data = is_number(head);  // otherwise a header row, kept verbatim
                saw_content = is_data;
            }
        }
        if (!is_data) {
            out << line << eol;
            continue;
        }

        // Raw comma split; only tokens for hidden cells are rewritten.
        std::vector<std::string> tokens;
        std::size_t tp = 0;
        while (true) {
            const std::size_t comma = line.find(',', tp);
            tokens.push_back(line.substr(tp, comma - tp));
            if (comma == std::string::npos) break;
            tp = comma + 1;
        }
        for (std::size_t c = 1; c < tokens.size(); ++c) {
            const std::size_t ch = c - 1;
            if (!visible[si].get(ch, ti)) tokens[c] = fmt_g17(filled[si].at(ch, ti));
        }
        for (std::size_t c = 0; c < tokens.size(); ++c) {
            if (c) out << ',';
            out << tokens[c];
        }
        out << eol;
        if (++ti == samples[si].n_times()) {
            ++si;
            ti = 0;
        }
    }
}

int cmd_impute(const std::string& ckpt_path, const std::string& input,
               const std::string& output) {
    require_file(ckpt_path, "checkpoint file");
    require_file(input, "data file");
    const checkpoint::Checkpoint ck = checkpoint::load_checkpoint(ckpt_path);
    const config::RunConfig cfg = config::parse_config_text(ck.config_text, ckpt_path);
    if (cfg.norm_mean.empty() || cfg.norm_std.size() != cfg.norm_mean.size())
        throw Error("checkpoint " + ckpt_path +
                    " carries no channel statistics; was it written by the train command?");
    const std::size_t expected = cfg.norm_mean.size();

    data::Dataset ds = data::load_csv(input, cfg.data_window);
    if (ds.channels() != expected)
        throw Error("channel mismatch: checkpoint expects " + std::to_string(expected) +
                    " channels, " + input + " has " + std::to_string(ds.channels()));

    std::vector<MaskGrid> visible;
    visible.reserve(ds.size());
    for (const TimeSeriesSample& s : ds.samples) visible.push_back(s.visibility());

    data::apply_normalization(ds, cfg.norm_mean, cfg.norm_std);
    model::Chain chain = model::Chain::create(config::chain_config(cfg, expected), 0);
    checkpoint::apply_checkpoint(chain.store, ck);

    std::vector<ad::Array> filled;
    filled.reserve(ds.size());
    std::size_t n_filled = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        filled.push_back(data::denormalize(ds, model::impute(chain, ds.samples[i], 0)));
        n_filled += visible[i].channels * visible[i].n_times - visible[i].count();
    }

    write_completed_csv(input, output, visible, ds.samples, filled);
    std::cout << "filled " << n_filled << " missing cells across " << ds.size()
              << " samples; wrote " << output << "\n";
    return 0;
}

int cmd_benchmark(const CommonFlags& flags) {
    config::RunConfig cfg = resolve_config(flags);
    data::Dataset ds = build_dataset(cfg);
    data::assign_splits(ds, cfg.data_train_frac, cfg.data_val_frac, cfg.seed);

    std::vector<eval::Method> methods;
    for (const std::string& name : config::split_list(cfg.bench_methods)) {
        if (name == "spline") {
            methods.push_back(eval::make_spline_method());
        } else if (name == "mean") {
            methods.push_back(eval::make_mean_method());
        } else {
            model::parse_chain_spec(name);  // reject typos before any training
            methods.push_back(eval::make_chain_method(
                name, config::chain_config(cfg, ds.channels()), config::train_config(cfg)));
        }
    }

    eval::MetricReport report = eval::run_benchmark(
        ds, methods, config::parse_rate_list(cfg.bench_rates), cfg.bench_trials, cfg.seed);

    // Prepend the full resolved configuration so every report is reproducible
    // from its own header.
    std::ostringstream echo;
    std::istringstream cfg_lines(config::config_text(cfg));
    std::string line;
    while (std::getline(cfg_lines, line)) echo << "# " << line << "\n";
    report.config_echo = echo.str() + report.config_echo;

    fs::create_directories(cfg.out_dir);
    const std::string agg = (fs::path(cfg.out_dir) / "report.csv").string();
    const std::string tri = (fs::path(cfg.out_dir) / "report_trials.csv").string();
    const std::string txt = (fs::path(cfg.out_dir) / "report.txt").string();
    eval::write_report_csv(report, agg);
    eval::write_trials_csv(report, tri);
    eval::write_report_text(report, txt);

    std::cout << eval::format_report_text(report);
    std::cout << "wrote " << agg << "\n"
              << "wrote " << tri << "\n"
              << "wrote " << txt << "\n";
    return 0;
}

int cmd_print_config(const CommonFlags& flags) {
    std::cout << config::config_text(resolve_config(flags));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"continuous-time autoencoder imputation toolkit"};
    app.require_subcommand(1);

    CommonFlags flags;
    bool verbose = false;
    std::string ckpt_path, input_path, output_path;

    auto add_common = [&flags](CLI::App* cmd, bool config_required) {
        auto* c = cmd->add_option("--config", flags.config_path, "run configuration file");
        if (config_required) c->required();
        cmd->add_option("--seed", flags.seed, "override the master seed")
            ->each([&flags](const std::string&) { flags.seed_set = true; });
        cmd->add_option("--out-dir", flags.out_dir, "override the output directory");
    };

    CLI::App* train_cmd =
        app.add_subcommand("train", "fit a model and write checkpoint + history");
    add_common(train_cmd, true);
    train_cmd->add_flag("--verbose", verbose, "progress lines on stderr");

    CLI::App* impute_cmd =
        app.add_subcommand("impute", "fill the missing cells of a CSV with a trained model");
    impute_cmd->add_option("--checkpoint", ckpt_path, "checkpoint written by train")->required();
    impute_cmd->add_option("--input", input_path, "CSV with NaN/empty cells to fill")->required();
    impute_cmd->add_option("--output", output_path, "completed CSV destination")->required();

    CLI::App* bench_cmd =
        app.add_subcommand("benchmark", "score imputers over missing-rate sweeps");
    add_common(bench_cmd, true);

    CLI::App* print_cmd =
        app.add_subcommand("print-config", "print the resolved configuration (defaults if none)");
    add_common(print_cmd, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) return cmd_train(flags, verbose);
        if (impute_cmd->parsed()) return cmd_impute(ckpt_path, input_path, output_path);
        if (bench_cmd->parsed()) return cmd_benchmark(flags);
        if (print_cmd->parsed()) return cmd_print_config(flags);
    } catch (const MissingFileError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
