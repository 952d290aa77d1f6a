#include "cta/optim.hpp"

#include <cmath>

namespace cta::ad {

Array init_params(const Shape& shape, std::size_t fan_in, Rng& rng) {
    if (fan_in == 0) throw Error("init_params: fan_in must be positive");
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Array out(shape, 0.0);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = rng.uniform(-bound, bound);
    return out;
}

Param& ParamStore::create(std::string name, Shape shape, std::size_t fan_in, Rng& rng) {
    auto p = std::make_unique<Param>();
    p->name = std::move(name);
    p->value = init_params(shape, fan_in, rng);
    p->index = static_cast<int>(items_.size());
    items_.push_back(std::move(p));
    return *items_.back();
}

Param& ParamStore::create_zeros(std::string name, Shape shape) {
    auto p = std::make_unique<Param>();
    p->name = std::move(name);
    p->value = Array(shape, 0.0);
    p->index = static_cast<int>(items_.size());
    items_.push_back(std::move(p));
    return *items_.back();
}

Param* ParamStore::find(const std::string& name) {
    for (auto& p : items_)
        if (p->name == name) return p.get();
    return nullptr;
}

const Param* ParamStore::find(const std::string& name) const {
    for (const auto& p : items_)
        if (p->name == name) return p.get();
    return nullptr;
}

std::vector<Array> ParamStore::snapshot() const {
    std::vector<Array> out;
    out.reserve(items_.size());
    for (const auto& p : items_) out.push_back(p->value);
    return out;
}

void ParamStore::restore(const std::vector<Array>& values) {
    if (values.size() != items_.size())
        throw Error("restore: snapshot holds " + std::to_string(values.size()) +
                    " tensors, store holds " + std::to_string(items_.size()));
    for (std::size_t i = 0; i < items_.size(); ++i) {
        if (values[i].shape != items_[i]->value.shape)
            throw ShapeError("restore: shape mismatch for " + items_[i]->name);
        items_[i]->value = values[i];
    }
}

std::vector<Array> collect_grads(const ParamStore& store, const GradMap& grads) {
    std::vector<Array> out;
    out.reserve(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
        auto it = grads.find(&store[i]);
        if (it != grads.end())
            out.push_back(it->second);
        else
            out.push_back(Array(store[i].value.shape, 0.0));
    }
    return out;
}

void OptimizerState::init(const ParamStore& store) {
    step = 0;
    m.clear();
    v.clear();
    for (std::size_t i = 0; i < store.size(); ++i) {
        m.push_back(Array(store[i].value.shape, 0.0));
        v.push_back(Array(store[i].value.shape, 0.0));
    }
}

void adam_step(ParamStore& store, const std::vector<Array>& grads, OptimizerState& state) {
    if (grads.size() != store.size() || state.m.size() != store.size())
        throw Error("adam_step: gradient/state size does not match parameter store");
    for (std::size_t i = 0; i < store.size(); ++i)
        if (!grads[i].all_finite())
            throw Error("adam_step: non-finite gradient for parameter " + store[i].name);

    state.step += 1;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < store.size(); ++i) {
        Array& p = store[i].value;
        Array& mi = state.m[i];
        Array& vi = state.v[i];
        const Array& g = grads[i];
        for (std::size_t j = 0; j < p.numel(); ++j) {
            mi.data[j] = state.beta1 * mi.data[j] + (1.0 - state.beta1) * g.data[j];
            vi.data[j] = state.beta2 * vi.data[j] + (1.0 - state.beta2) * g.data[j] * g.data[j];
            double mhat = mi.data[j] / bc1;
            double vhat = vi.data[j] / bc2;
            p.data[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

}  // namespace cta::ad
