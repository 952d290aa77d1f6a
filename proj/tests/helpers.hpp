#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cta/optim.hpp"
#include "cta/tape.hpp"

namespace testutil {

inline bool close_abs(double a, double b, double tol) { return std::abs(a - b) <= tol; }

inline double rel_err(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct FdReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
};

// Central-difference gradient oracle. `build` reconstructs the scalar loss on
// a fresh tape from the current parameter values; every parameter element is
// perturbed by +/-h and the analytic adjoint from backward() is compared
// against (f(p+h) - f(p-h)) / 2h.
inline FdReport fd_check(cta::ad::ParamStore& store,
                         const std::function<cta::ad::Var(cta::ad::Tape&)>& build,
                         double h = 1e-5) {
    using namespace cta::ad;
    Tape tape;
    Var loss = build(tape);
    double base = tape.val(loss).data[0];
    (void)base;
    GradMap gm = tape.backward(loss);
    std::vector<Array> analytic = collect_grads(store, gm);

    auto eval = [&]() {
        Tape t2;
        Var l2 = build(t2);
        return t2.val(l2).data[0];
    };

    FdReport rep;
    for (std::size_t i = 0; i < store.size(); ++i) {
        Array& value = store[i].value;
        for (std::size_t j = 0; j < value.numel(); ++j) {
            double keep = value.data[j];
            value.data[j] = keep + h;
            double fp = eval();
            value.data[j] = keep - h;
            double fm = eval();
            value.data[j] = keep;
            double fd = (fp - fm) / (2.0 * h);
            double re = rel_err(analytic[i].data[j], fd);
            if (re > rep.max_rel_err) {
                rep.max_rel_err = re;
                rep.worst_param = store[i].name;
                rep.worst_index = j;
            }
        }
    }
    return rep;
}

}  // namespace testutil
