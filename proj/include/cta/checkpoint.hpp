#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cta/optim.hpp"

namespace cta::checkpoint {

// On-disk model state: the full configuration text followed by every named
// tensor in store order. Binary layout (native little-endian):
//   magic "CTACKPT1" | u32 version | u64 config_len | config bytes |
//   u32 n_tensors | per tensor: u32 name_len | name | u32 rank | u64 dims... |
//   f64 data
struct Checkpoint {
    std::string config_text;
    std::vector<std::pair<std::string, ad::Array>> tensors;
};

void save_checkpoint(const std::string& path, const std::string& config_text,
                     const ad::ParamStore& store);

Checkpoint load_checkpoint(const std::string& path);

// Copies tensors into the store, matching strictly by name and shape; any
// missing, extra, or reshaped tensor is an error.
void apply_checkpoint(ad::ParamStore& store, const Checkpoint& ck);

}  // namespace cta::checkpoint
