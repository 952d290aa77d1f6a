#include "cta/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "cta/errors.hpp"

namespace cta::train {

using ad::Array;
using ad::Shape;
using ad::Tape;
using ad::Var;

MaskGrid sample_intentional_mask(const MaskGrid& candidates, double ratio, Rng& rng) {
    if (ratio < 0.0 || ratio > 1.0) throw ConfigError("mask ratio must lie in [0, 1]");
    MaskGrid out(candidates.channels, candidates.n_times, false);
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    for (std::size_t c = 0; c < candidates.channels; ++c)
        for (std::size_t i = 0; i < candidates.n_times; ++i)
            if (candidates.get(c, i)) cells.emplace_back(c, i);
    const auto k = static_cast<std::size_t>(std::floor(ratio * cells.size()));
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + rng.below(cells.size() - i);
        std::swap(cells[i], cells[j]);
        out.set(cells[i].first, cells[i].second, true);
    }
    return out;
}

namespace {

// || mask . (pred - truth) ||_F, optionally divided by the active-cell count.
// An empty mask yields a constant zero that never touches the tape's
// differentiable part (so no gradient flows through sqrt at zero).
Var masked_norm(Tape& t, const std::vector<Var>& pred, const Array& truth, const MaskGrid& mask,
                bool normalize_terms) {
    const std::size_t count = mask.count();
    if (count == 0) return t.leaf(0.0);

    const std::size_t dx = mask.channels, n = mask.n_times;
    Var acc{};
    for (std::size_t i = 0; i < n; ++i) {
        bool any = false;
        Array m(Shape{dx}, 0.0), tr(Shape{dx}, 0.0);
        for (std::size_t c = 0; c < dx; ++c) {
            if (!mask.get(c, i)) continue;
            const double tv = truth.at(c, i);
            if (std::isnan(tv))
                throw Error("loss: no ground truth for masked cell (channel " +
                            std::to_string(c) + ", time " + std::to_string(i) + ")");
            m.data[c] = 1.0;
            tr.data[c] = tv;
            any = true;
        }
        if (!any) continue;
        Var diff = ad::sub(ad::mul(t.leaf(m), pred[i]), t.leaf(tr));
        Var ss = ad::sum(ad::square(diff));
        acc = acc.valid() ? ad::add(acc, ss) : ss;
    }
    Var norm = ad::sqrt(acc);
    if (normalize_terms) norm = ad::smul(norm, 1.0 / static_cast<double>(count));
    return norm;
}

}  // namespace

LossVars loss_vars(Tape& t, const model::ChainVars& v, const Array& truth, const MaskSet& masks,
                   double kld_weight, bool normalize_terms) {
    const std::size_t n = v.xtilde.size();
    if (truth.rank() != 2 || truth.cols() != n)
        throw ShapeError("loss: truth is " + ad::shape_str(truth.shape) + " but the forward pass" +
                         " produced " + std::to_string(n) + " time steps");
    if (masks.supervised.n_times != n || masks.intentional.n_times != n)
        throw ShapeError("loss: mask width does not match the forward pass");

    LossVars lv;
    lv.recon_tilde = masked_norm(t, v.xtilde, truth, masks.supervised, normalize_terms);
    lv.recon_hat = masked_norm(t, v.xhat, truth, masks.supervised, normalize_terms);
    lv.recon_hat_prime = v.xhat_prime.empty()
                             ? t.leaf(0.0)
                             : masked_norm(t, v.xhat_prime, truth, masks.supervised,
                                           normalize_terms);
    lv.recon_masked = masked_norm(t, v.xtilde, truth, masks.intentional, normalize_terms);
    if (v.kld.empty()) {
        lv.kld = t.leaf(0.0);
    } else {
        Var acc = v.kld[0];
        for (std::size_t i = 1; i < v.kld.size(); ++i) acc = ad::add(acc, v.kld[i]);
        lv.kld = ad::smul(acc, kld_weight);
    }
    lv.total = ad::add(ad::add(ad::add(lv.recon_tilde, lv.recon_hat), lv.recon_hat_prime),
                       ad::add(lv.recon_masked, lv.kld));
    return lv;
}

LossBreakdown read_loss(const Tape& t, const LossVars& lv) {
    LossBreakdown b;
    b.recon_tilde = t.val(lv.recon_tilde).data[0];
    b.recon_hat = t.val(lv.recon_hat).data[0];
    b.recon_hat_prime = t.val(lv.recon_hat_prime).data[0];
    b.recon_masked = t.val(lv.recon_masked).data[0];
    b.kld = t.val(lv.kld).data[0];
    b.total = t.val(lv.total).data[0];
    return b;
}

namespace {

TimeSeriesSample hide_cells(const TimeSeriesSample& s, const MaskGrid& m) {
    TimeSeriesSample view = s;
    for (std::size_t c = 0; c < m.channels; ++c)
        for (std::size_t i = 0; i < m.n_times; ++i)
            if (m.get(c, i))
                view.values.at(c, i) = std::numeric_limits<double>::quiet_NaN();
    return view;
}

}  // namespace

TrainResult train(model::Chain& chain, const data::Dataset& ds, const TrainConfig& cfg) {
    const std::vector<std::size_t> idx_train = ds.indices(data::Split::Train);
    const std::vector<std::size_t> idx_val = ds.indices(data::Split::Val);
    if (idx_train.empty()) throw Error("train: the dataset has no training samples");
    if (cfg.batch == 0) throw ConfigError("train: batch size must be positive");

    Rng batch_rng(derive_seed(cfg.seed, 10));
    Rng mask_rng(derive_seed(cfg.seed, 11));
    Rng noise_rng(derive_seed(cfg.seed, 12));
    Rng val_mask_rng(derive_seed(cfg.seed, 13));

    // Validation cells are hidden once and stay fixed for the whole run.
    std::vector<TimeSeriesSample> val_views;
    std::vector<MaskGrid> val_masks;
    for (std::size_t j : idx_val) {
        MaskGrid m = sample_intentional_mask(ds.samples[j].visibility(), cfg.mask_ratio,
                                             val_mask_rng);
        val_masks.push_back(m);
        val_views.push_back(hide_cells(ds.samples[j], m));
    }

    auto val_mae = [&]() {
        double abs_sum = 0.0;
        std::size_t count = 0;
        for (std::size_t vi = 0; vi < val_views.size(); ++vi) {
            Array filled = model::impute(chain, val_views[vi], 0);
            const Array& truth = ds.truth_model[idx_val[vi]];
            const MaskGrid& m = val_masks[vi];
            for (std::size_t c = 0; c < m.channels; ++c)
                for (std::size_t i = 0; i < m.n_times; ++i)
                    if (m.get(c, i)) {
                        abs_sum += std::abs(filled.at(c, i) - truth.at(c, i));
                        ++count;
                    }
        }
        return count ? abs_sum / static_cast<double>(count)
                     : std::numeric_limits<double>::quiet_NaN();
    };

    TrainResult res;
    auto consider_best = [&](long iter, double mae) {
        if (std::isnan(mae)) return;
        if (mae < res.best_val_mae) {
            res.best_val_mae = mae;
            res.best_iter = iter;
            res.best_params = chain.store.snapshot();
        }
    };

    if (cfg.max_iter <= 0) {
        if (!val_views.empty()) consider_best(0, val_mae());
        if (res.best_params.empty()) res.best_params = chain.store.snapshot();
        return res;
    }

    ad::OptimizerState opt;
    opt.lr = cfg.lr;
    opt.beta1 = cfg.beta1;
    opt.beta2 = cfg.beta2;
    opt.eps = cfg.eps;
    opt.init(chain.store);

    double last_finite = std::numeric_limits<double>::quiet_NaN();
    for (long iter = 1; iter <= cfg.max_iter; ++iter) {
        std::vector<Array> grad_sum;
        LossBreakdown acc;
        for (std::size_t b = 0; b < cfg.batch; ++b) {
            const std::size_t j = idx_train[batch_rng.below(idx_train.size())];
            const TimeSeriesSample& sample = ds.samples[j];
            MaskGrid vis = sample.visibility();
            MaskGrid intentional = sample_intentional_mask(vis, cfg.mask_ratio, mask_rng);
            TimeSeriesSample view = hide_cells(sample, intentional);

            Tape t;
            LossBreakdown lb;
            try {
                model::ChainVars v =
                    model::chain_forward(t, chain, view, model::Mode::Train, noise_rng);
                LossVars lv = loss_vars(t, v, ds.truth_model[j], MaskSet{vis, intentional},
                                        cfg.kld_weight, cfg.normalize_terms);
                lb = read_loss(t, lv);
                if (!std::isfinite(lb.total))
                    throw DivergenceError("loss is not finite",
                                          static_cast<double>(iter));
                ad::GradMap gm = t.backward(lv.total);
                std::vector<Array> grads = ad::collect_grads(chain.store, gm);
                if (grad_sum.empty()) {
                    grad_sum = std::move(grads);
                } else {
                    for (std::size_t p = 0; p < grads.size(); ++p)
                        for (std::size_t e = 0; e < grads[p].numel(); ++e)
                            grad_sum[p].data[e] += grads[p].data[e];
                }
            } catch (const DivergenceError& e) {
                std::string last = std::isnan(last_finite) ? "none" : std::to_string(last_finite);
                throw DivergenceError(std::string("training diverged at iteration ") +
                                          std::to_string(iter) + " (last finite loss: " + last +
                                          "): " + e.what(),
                                      static_cast<double>(iter));
            }
            acc.recon_tilde += lb.recon_tilde;
            acc.recon_hat += lb.recon_hat;
            acc.recon_hat_prime += lb.recon_hat_prime;
            acc.recon_masked += lb.recon_masked;
            acc.kld += lb.kld;
            acc.total += lb.total;
        }
        const double inv = 1.0 / static_cast<double>(cfg.batch);
        acc.recon_tilde *= inv;
        acc.recon_hat *= inv;
        acc.recon_hat_prime *= inv;
        acc.recon_masked *= inv;
        acc.kld *= inv;
        acc.total *= inv;
        last_finite = acc.total;
        for (Array& g : grad_sum)
            for (double& x : g.data) x *= inv;
        ad::adam_step(chain.store, grad_sum, opt);

        HistoryRow row;
        row.iter = iter;
        row.loss = acc;
        const bool eval_now =
            !val_views.empty() && (iter % cfg.val_every == 0 || iter == cfg.max_iter);
        if (eval_now) {
            row.has_val = true;
            row.val_mae = val_mae();
            consider_best(iter, row.val_mae);
        }
        if (cfg.verbose && (eval_now || iter == 1))
            std::cerr << "iter " << iter << "  loss " << acc.total
                      << (row.has_val ? "  val_mae " + std::to_string(row.val_mae) : "") << "\n";
        res.history.push_back(row);
        res.iters_run = iter;
    }

    if (res.best_params.empty()) {
        res.best_params = chain.store.snapshot();
        res.best_iter = res.iters_run;
    } else {
        chain.store.restore(res.best_params);
    }
    return res;
}

void write_history_csv(const std::vector<HistoryRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << "iter,total,recon_tilde,recon_hat,recon_hat_prime,recon_masked,kld,val_mae\n";
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.10g", v);
        out << ',' << buf;
    };
    for (const HistoryRow& r : rows) {
        out << r.iter;
        put(r.loss.total);
        put(r.loss.recon_tilde);
        put(r.loss.recon_hat);
        put(r.loss.recon_hat_prime);
        put(r.loss.recon_masked);
        put(r.loss.kld);
        if (r.has_val)
            put(r.val_mae);
        else
            out << ',';
        out << "\n";
    }
}

}  // namespace cta::train
