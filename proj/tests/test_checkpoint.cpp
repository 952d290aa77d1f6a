#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "cta/checkpoint.hpp"
#include "cta/config.hpp"
#include "cta/errors.hpp"
#include "cta/model.hpp"
#include "helpers.hpp"

using namespace cta;

namespace {

// Unique-ish scratch path under the build tree's working directory.
std::string tmp_path(const std::string& stem) { return "ckpt_test_" + stem + ".bin"; }

config::RunConfig nondefault_config() {
    config::RunConfig c;
    c.seed = 987654321;
    c.out_dir = "results/run1";
    c.data_source = "csv";
    c.data_csv_path = "series.csv";
    c.data_window = 48;
    c.data_channels = 3;
    c.data_length = 64;
    c.data_samples = 32;
    c.data_irregularity = 0.25;
    c.data_noise = 0.01;
    c.data_damping = 0.35;
    c.data_phase_jitter = 1.5;
    c.data_train_frac = 0.6;
    c.data_val_frac = 0.2;
    c.data_missing_rate = 0.5;
    c.model_chain = "VAE-AE-AE";
    c.model_latent_dim = 5;
    c.model_decoder_dim = 6;
    c.model_field_hidden = 7;
    c.model_field_layers = 2;
    c.model_head_hidden = 9;
    c.model_time_feature = true;
    c.model_masked_alpha = true;
    c.solver_step = 0.125;
    c.solver_method = "rk4";
    c.train_lr = 0.0025;
    c.train_beta1 = 0.85;
    c.train_beta2 = 0.995;
    c.train_eps = 1e-7;
    c.train_batch = 4;
    c.train_max_iter = 123;
    c.train_mask_ratio = 0.15;
    c.train_kld_weight = 0.75;
    c.train_normalize_terms = false;
    c.train_val_every = 10;
    c.bench_methods = "spline,mean";
    c.bench_rates = "0.1,0.9";
    c.bench_trials = 2;
    // 1/3 and sqrt(2) exercise full-precision round trips.
    c.norm_mean = {1.0 / 3.0, -2.5, 0.0};
    c.norm_std = {std::sqrt(2.0), 1.0, 0.125};
    return c;
}

model::ChainConfig small_chain_config() {
    model::ChainConfig mc;
    mc.channels = 2;
    mc.chain = {model::Variant::VAE, model::Variant::AE};
    mc.latent_dim = 3;
    mc.decoder_dim = 3;
    mc.field_hidden = 4;
    mc.field_layers = 1;
    mc.head_hidden = 4;
    mc.step = 0.25;
    return mc;
}

TimeSeriesSample small_sample() {
    TimeSeriesSample s;
    s.raw_times = {0.0, 0.4, 1.0};
    s.times = {0.0, 0.4, 1.0};
    s.values = ad::Array({2, 3}, std::vector<double>{0.3, std::nan(""), -0.6,  //
                                                     1.0, 0.2, std::nan("")});
    s.observed = MaskGrid(2, 3);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < 3; ++i)
            s.observed.set(c, i, std::isfinite(s.values.at(c, i)));
    s.eval_mask = MaskGrid(2, 3);
    s.channel_fill = {0.0, 0.0};
    return s;
}

}  // namespace

TEST_CASE("config text round trips every field exactly") {
    const config::RunConfig c = nondefault_config();
    const std::string text = config::config_text(c);
    const config::RunConfig back = config::parse_config_text(text, "<test>");

    CHECK(back.seed == c.seed);
    CHECK(back.out_dir == c.out_dir);
    CHECK(back.data_source == c.data_source);
    CHECK(back.data_csv_path == c.data_csv_path);
    CHECK(back.data_window == c.data_window);
    CHECK(back.data_channels == c.data_channels);
    CHECK(back.data_length == c.data_length);
    CHECK(back.data_samples == c.data_samples);
    CHECK(back.data_irregularity == c.data_irregularity);
    CHECK(back.data_noise == c.data_noise);
    CHECK(back.data_damping == c.data_damping);
    CHECK(back.data_phase_jitter == c.data_phase_jitter);
    CHECK(back.data_train_frac == c.data_train_frac);
    CHECK(back.data_val_frac == c.data_val_frac);
    CHECK(back.data_missing_rate == c.data_missing_rate);
    CHECK(back.model_chain == c.model_chain);
    CHECK(back.model_latent_dim == c.model_latent_dim);
    CHECK(back.model_decoder_dim == c.model_decoder_dim);
    CHECK(back.model_field_hidden == c.model_field_hidden);
    CHECK(back.model_field_layers == c.model_field_layers);
    CHECK(back.model_head_hidden == c.model_head_hidden);
    CHECK(back.model_time_feature == c.model_time_feature);
    CHECK(back.model_masked_alpha == c.model_masked_alpha);
    CHECK(back.solver_step == c.solver_step);
    CHECK(back.solver_method == c.solver_method);
    CHECK(back.train_lr == c.train_lr);
    CHECK(back.train_beta1 == c.train_beta1);
    CHECK(back.train_beta2 == c.train_beta2);
    CHECK(back.train_eps == c.train_eps);
    CHECK(back.train_batch == c.train_batch);
    CHECK(back.train_max_iter == c.train_max_iter);
    CHECK(back.train_mask_ratio == c.train_mask_ratio);
    CHECK(back.train_kld_weight == c.train_kld_weight);
    CHECK(back.train_normalize_terms == c.train_normalize_terms);
    CHECK(back.train_val_every == c.train_val_every);
    CHECK(back.bench_methods == c.bench_methods);
    CHECK(back.bench_rates == c.bench_rates);
    CHECK(back.bench_trials == c.bench_trials);
    REQUIRE(back.norm_mean.size() == 3);
    REQUIRE(back.norm_std.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.norm_mean[i] == c.norm_mean[i]);  // bitwise, needs %.17g
        CHECK(back.norm_std[i] == c.norm_std[i]);
    }

    // Serializing the round-tripped struct reproduces the text byte for byte.
    CHECK(config::config_text(back) == text);
}

TEST_CASE("defaults survive an empty parse and comments are skipped") {
    const config::RunConfig def = config::default_config();
    const config::RunConfig parsed =
        config::parse_config_text("# just a comment\n\n   \n", "<test>");
    CHECK(config::config_text(parsed) == config::config_text(def));
    CHECK(def.norm_mean.empty());
    CHECK(def.norm_std.empty());
}

TEST_CASE("config parse errors carry origin and line number") {
    CHECK_THROWS_WITH_AS(config::parse_config_text("seed = 1\nnot_a_key = 2\n", "file.cfg"),
                         doctest::Contains("file.cfg:2"), ConfigError);
    CHECK_THROWS_WITH_AS(config::parse_config_text("seed 1\n", "file.cfg"),
                         doctest::Contains("file.cfg:1"), ConfigError);
    CHECK_THROWS_WITH_AS(config::parse_config_text("train.lr = fast\n", "file.cfg"),
                         doctest::Contains("train.lr"), ConfigError);
    CHECK_THROWS_WITH_AS(config::parse_config_text("model.time_feature = maybe\n", "x"),
                         doctest::Contains("true/false"), ConfigError);
    CHECK_THROWS_WITH_AS(config::parse_config_text("data.source = parquet\n", "x"),
                         doctest::Contains("synthetic"), ConfigError);
    CHECK_THROWS_WITH_AS(config::parse_config_text("solver.method = heun\n", "x"),
                         doctest::Contains("euler"), ConfigError);
    CHECK_THROWS_WITH_AS(config::parse_config_text("model.chain = AE-AE-AE-AE\n", "x"),
                         doctest::Contains("x:1"), ConfigError);
    CHECK_THROWS_WITH_AS(config::parse_config_text("train.val_every = 0\n", "x"),
                         doctest::Contains("at least 1"), ConfigError);
}

TEST_CASE("apply_kv updates single fields in place") {
    config::RunConfig c;
    config::apply_kv(c, "model.chain", "VAE-AE");
    CHECK(c.model_chain == "VAE-AE");
    config::apply_kv(c, "train.batch", "16");
    CHECK(c.train_batch == 16);
    config::apply_kv(c, "norm.mean", "0.5, -1.25");
    REQUIRE(c.norm_mean.size() == 2);
    CHECK(c.norm_mean[0] == 0.5);
    CHECK(c.norm_mean[1] == -1.25);
    CHECK_THROWS_AS(config::apply_kv(c, "bogus", "1"), ConfigError);
    CHECK_THROWS_AS(config::apply_kv(c, "data.channels", "-3"), ConfigError);
}

TEST_CASE("load_config reads a file and names it in errors") {
    const std::string path = tmp_path("cfg");
    {
        std::ofstream os(path + ".cfg");
        os << "# comment\nseed = 42\ntrain.batch = 2\n";
    }
    const config::RunConfig c = config::load_config(path + ".cfg");
    CHECK(c.seed == 42);
    CHECK(c.train_batch == 2);
    CHECK_THROWS_WITH_AS(config::load_config("no_such_file.cfg"),
                         doctest::Contains("no_such_file.cfg"), ConfigError);
    std::remove((path + ".cfg").c_str());
}

TEST_CASE("projections copy the matching fields") {
    const config::RunConfig c = nondefault_config();

    const model::ChainConfig mc = config::chain_config(c, 3);
    CHECK(mc.channels == 3);
    CHECK(mc.chain.size() == 3);
    CHECK(mc.chain[0] == model::Variant::VAE);
    CHECK(mc.latent_dim == 5);
    CHECK(mc.decoder_dim == 6);
    CHECK(mc.field_hidden == 7);
    CHECK(mc.field_layers == 2);
    CHECK(mc.head_hidden == 9);
    CHECK(mc.time_feature);
    CHECK(mc.masked_alpha);
    CHECK(mc.step == 0.125);
    CHECK(mc.method == ncde::SolveMethod::RK4);

    const train::TrainConfig tc = config::train_config(c);
    CHECK(tc.lr == 0.0025);
    CHECK(tc.batch == 4);
    CHECK(tc.max_iter == 123);
    CHECK(tc.mask_ratio == 0.15);
    CHECK(tc.kld_weight == 0.75);
    CHECK_FALSE(tc.normalize_terms);
    CHECK(tc.val_every == 10);
    CHECK(tc.seed == derive_seed(c.seed, 4));

    const data::SyntheticConfig sc = config::synthetic_config(c);
    CHECK(sc.channels == 3);
    CHECK(sc.length == 64);
    CHECK(sc.samples == 32);
    CHECK(sc.irregularity == 0.25);
    CHECK(sc.noise == 0.01);
    CHECK(sc.damping == 0.35);
    CHECK(sc.phase_jitter == 1.5);
    CHECK(sc.seed == derive_seed(c.seed, 1));
}

TEST_CASE("rate list parsing validates the range") {
    const std::vector<double> rs = config::parse_rate_list("0.3, 0.5,0.7");
    REQUIRE(rs.size() == 3);
    CHECK(rs[0] == 0.3);
    CHECK(rs[1] == 0.5);
    CHECK(rs[2] == 0.7);
    CHECK_THROWS_AS(config::parse_rate_list("0.3,1.5"), ConfigError);
    CHECK_THROWS_AS(config::parse_rate_list("-0.1"), ConfigError);
    CHECK(config::split_list(" a , b ,, c ") ==
          std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("checkpoint round trip restores every tensor bitwise") {
    const model::ChainConfig mc = small_chain_config();
    model::Chain a = model::Chain::create(mc, 77);
    const std::string cfg_text = config::config_text(nondefault_config());
    const std::string path = tmp_path("roundtrip");

    checkpoint::save_checkpoint(path, cfg_text, a.store);
    const checkpoint::Checkpoint ck = checkpoint::load_checkpoint(path);

    CHECK(ck.config_text == cfg_text);
    REQUIRE(ck.tensors.size() == a.store.size());
    for (std::size_t i = 0; i < ck.tensors.size(); ++i) {
        CHECK(ck.tensors[i].first == a.store[i].name);  // store order preserved
        CHECK(ck.tensors[i].second.shape == a.store[i].value.shape);
    }

    // A fresh chain with a different seed starts from different weights...
    model::Chain b = model::Chain::create(mc, 123456);
    bool any_differ = false;
    for (std::size_t i = 0; i < b.store.size(); ++i) {
        for (std::size_t k = 0; k < b.store[i].value.data.size(); ++k) {
            if (b.store[i].value.data[k] != a.store[i].value.data[k]) any_differ = true;
        }
    }
    CHECK(any_differ);

    // ...and applying the checkpoint makes it bitwise identical.
    checkpoint::apply_checkpoint(b.store, ck);
    for (std::size_t i = 0; i < b.store.size(); ++i) {
        REQUIRE(b.store[i].value.data.size() == a.store[i].value.data.size());
        for (std::size_t k = 0; k < b.store[i].value.data.size(); ++k) {
            CHECK(b.store[i].value.data[k] == a.store[i].value.data[k]);
        }
    }
    std::remove(path.c_str());
}

TEST_CASE("restored model imputes identically to the saved one") {
    const model::ChainConfig mc = small_chain_config();
    model::Chain a = model::Chain::create(mc, 31);
    const TimeSeriesSample s = small_sample();
    const std::string path = tmp_path("impute");

    const ad::Array before = model::impute(a, s, 0);
    checkpoint::save_checkpoint(path, "", a.store);

    model::Chain b = model::Chain::create(mc, 500);
    checkpoint::apply_checkpoint(b.store, checkpoint::load_checkpoint(path));
    const ad::Array after = model::impute(b, s, 0);

    REQUIRE(before.shape == after.shape);
    for (std::size_t k = 0; k < before.data.size(); ++k) {
        CHECK(before.data[k] == after.data[k]);
    }
    std::remove(path.c_str());
}

TEST_CASE("apply rejects mismatched models without partial updates") {
    const model::ChainConfig mc = small_chain_config();
    model::Chain a = model::Chain::create(mc, 1);
    const std::string path = tmp_path("mismatch");
    checkpoint::save_checkpoint(path, "", a.store);
    const checkpoint::Checkpoint ck = checkpoint::load_checkpoint(path);

    SUBCASE("different architecture is missing tensors") {
        model::ChainConfig single = mc;
        single.chain = {model::Variant::AE};
        model::Chain b = model::Chain::create(single, 1);
        CHECK_THROWS_AS(checkpoint::apply_checkpoint(b.store, ck), Error);
    }
    SUBCASE("different width is a shape mismatch") {
        model::ChainConfig wide = mc;
        wide.latent_dim = 4;
        model::Chain b = model::Chain::create(wide, 1);
        const std::vector<ad::Array> pristine = b.store.snapshot();
        CHECK_THROWS_AS(checkpoint::apply_checkpoint(b.store, ck), ShapeError);
        // Validation failed up front, so nothing was written.
        const std::vector<ad::Array> now = b.store.snapshot();
        REQUIRE(now.size() == pristine.size());
        for (std::size_t i = 0; i < now.size(); ++i) {
            for (std::size_t k = 0; k < now[i].data.size(); ++k) {
                CHECK(now[i].data[k] == pristine[i].data[k]);
            }
        }
    }
    SUBCASE("extra tensor in the checkpoint is rejected") {
        checkpoint::Checkpoint extra = ck;
        extra.tensors.emplace_back("phantom", ad::Array({2}, 0.0));
        model::Chain b = model::Chain::create(mc, 1);
        CHECK_THROWS_WITH_AS(checkpoint::apply_checkpoint(b.store, extra),
                             doctest::Contains("phantom"), Error);
    }
    std::remove(path.c_str());
}

TEST_CASE("corrupt and missing checkpoint files are reported") {
    CHECK_THROWS_AS(checkpoint::load_checkpoint("does_not_exist.ckpt"), Error);

    const std::string bad = tmp_path("badmagic");
    {
        std::ofstream os(bad, std::ios::binary);
        os << "NOTACKPTxxxxxxxxxxxxxxxx";
    }
    CHECK_THROWS_WITH_AS(checkpoint::load_checkpoint(bad), doctest::Contains("magic"),
                         ParseError);
    std::remove(bad.c_str());

    // Truncate a valid file in the middle of the tensor section.
    const model::ChainConfig mc = small_chain_config();
    model::Chain a = model::Chain::create(mc, 5);
    const std::string full = tmp_path("full");
    checkpoint::save_checkpoint(full, "seed = 1\n", a.store);
    std::ifstream is(full, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    is.close();
    const std::string cut = tmp_path("cut");
    {
        std::ofstream os(cut, std::ios::binary);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_WITH_AS(checkpoint::load_checkpoint(cut), doctest::Contains("truncated"),
                         ParseError);
    std::remove(full.c_str());
    std::remove(cut.c_str());
}

TEST_CASE("checkpoint config text survives embedding byte for byte") {
    // The embedded blob is the exact canonical text, so a load + parse
    // reproduces the config including full-precision floats.
    config::RunConfig c = nondefault_config();
    c.norm_mean = {0.1 + 0.2};  // 0.30000000000000004, classic precision trap
    const std::string text = config::config_text(c);

    model::ChainConfig mc = small_chain_config();
    model::Chain a = model::Chain::create(mc, 9);
    const std::string path = tmp_path("embed");
    checkpoint::save_checkpoint(path, text, a.store);

    const checkpoint::Checkpoint ck = checkpoint::load_checkpoint(path);
    const config::RunConfig back = config::parse_config_text(ck.config_text, path);
    REQUIRE(back.norm_mean.size() == 1);
    CHECK(back.norm_mean[0] == 0.1 + 0.2);
    CHECK(config::config_text(back) == text);
    std::remove(path.c_str());
}
