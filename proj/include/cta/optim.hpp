#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cta/rng.hpp"
#include "cta/tape.hpp"

namespace cta::ad {

// Uniform init on [-1/sqrt(fan_in), +1/sqrt(fan_in)], seeded.
Array init_params(const Shape& shape, std::size_t fan_in, Rng& rng);

// Owns every trainable tensor of a model in a stable order (checkpoint layout
// and optimizer state are index-aligned with it).
class ParamStore {
public:
    Param& create(std::string name, Shape shape, std::size_t fan_in, Rng& rng);
    Param& create_zeros(std::string name, Shape shape);

    std::size_t size() const { return items_.size(); }
    Param& operator[](std::size_t i) { return *items_[i]; }
    const Param& operator[](std::size_t i) const { return *items_[i]; }

    // Lookup by name; nullptr when absent.
    Param* find(const std::string& name);
    const Param* find(const std::string& name) const;

    std::vector<Array> snapshot() const;
    void restore(const std::vector<Array>& values);

private:
    std::vector<std::unique_ptr<Param>> items_;  // unique_ptr: stable addresses
};

// Flattens a GradMap into store order; parameters absent from the map (not
// touched by the forward pass) get zero gradients.
std::vector<Array> collect_grads(const ParamStore& store, const GradMap& grads);

struct OptimizerState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<Array> m, v;  // first/second moments, store-order

    void init(const ParamStore& store);
};

// One Adam update with bias correction. Throws if a gradient is non-finite,
// naming the offending parameter.
void adam_step(ParamStore& store, const std::vector<Array>& grads, OptimizerState& state);

}  // namespace cta::ad
