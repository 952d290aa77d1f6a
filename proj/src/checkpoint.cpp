#include "cta/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

#include "cta/errors.hpp"

namespace cta::checkpoint {

namespace {

constexpr char kMagic[8] = {'C', 'T', 'A', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

// Sanity bound on counts read from the file so a corrupt header fails fast
// instead of attempting a huge allocation.
constexpr std::uint64_t kMaxReasonable = 1ull << 32;

void put_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

struct Reader {
    std::ifstream& is;
    const std::string& path;

    void raw(void* dst, std::size_t n, const char* what) {
        is.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(is.gcount()) != n) {
            throw ParseError(path + ": truncated checkpoint (while reading " + what + ")", 0);
        }
    }

    std::uint32_t u32(const char* what) {
        std::uint32_t v = 0;
        raw(&v, sizeof v, what);
        return v;
    }

    std::uint64_t u64(const char* what) {
        std::uint64_t v = 0;
        raw(&v, sizeof v, what);
        return v;
    }

    std::string str(std::size_t n, const char* what) {
        std::string s(n, '\0');
        if (n > 0) raw(s.data(), n, what);
        return s;
    }
};

}  // namespace

void save_checkpoint(const std::string& path, const std::string& config_text,
                     const ad::ParamStore& store) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open checkpoint file for writing: " + path);

    os.write(kMagic, sizeof kMagic);
    put_u32(os, kVersion);
    put_u64(os, config_text.size());
    os.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));

    put_u32(os, static_cast<std::uint32_t>(store.size()));
    for (std::size_t i = 0; i < store.size(); ++i) {
        const ad::Param& p = store[i];
        put_u32(os, static_cast<std::uint32_t>(p.name.size()));
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        put_u32(os, static_cast<std::uint32_t>(p.value.rank()));
        for (std::size_t dim : p.value.shape) put_u64(os, dim);
        os.write(reinterpret_cast<const char*>(p.value.data.data()),
                 static_cast<std::streamsize>(p.value.data.size() * sizeof(double)));
    }
    os.flush();
    if (!os) throw Error("failed to write checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open checkpoint file: " + path);
    Reader r{is, path};

    char magic[sizeof kMagic];
    r.raw(magic, sizeof magic, "magic");
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw ParseError(path + ": not a checkpoint file (bad magic)", 0);
    }
    std::uint32_t version = r.u32("version");
    if (version != kVersion) {
        throw ParseError(
            path + ": unsupported checkpoint version " + std::to_string(version), 0);
    }

    Checkpoint ck;
    std::uint64_t config_len = r.u64("config length");
    if (config_len > kMaxReasonable) {
        throw ParseError(path + ": implausible config length", 0);
    }
    ck.config_text = r.str(static_cast<std::size_t>(config_len), "config text");

    std::uint32_t n_tensors = r.u32("tensor count");
    ck.tensors.reserve(n_tensors);
    for (std::uint32_t ti = 0; ti < n_tensors; ++ti) {
        std::uint32_t name_len = r.u32("tensor name length");
        std::string name = r.str(name_len, "tensor name");
        std::uint32_t rank = r.u32("tensor rank");
        if (rank > 8) throw ParseError(path + ": implausible tensor rank for " + name, 0);
        ad::Shape shape(rank);
        std::uint64_t numel = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            std::uint64_t dim = r.u64("tensor dimension");
            if (dim == 0 || dim > kMaxReasonable) {
                throw ParseError(path + ": implausible dimension for tensor " + name, 0);
            }
            shape[d] = static_cast<std::size_t>(dim);
            numel *= dim;
        }
        if (numel > kMaxReasonable) {
            throw ParseError(path + ": implausible element count for tensor " + name, 0);
        }
        ad::Array value(shape, 0.0);
        r.raw(value.data.data(), static_cast<std::size_t>(numel) * sizeof(double),
              "tensor data");
        ck.tensors.emplace_back(std::move(name), std::move(value));
    }
    return ck;
}

void apply_checkpoint(ad::ParamStore& store, const Checkpoint& ck) {
    std::set<std::string> seen;
    for (const auto& [name, value] : ck.tensors) {
        ad::Param* p = store.find(name);
        if (p == nullptr) {
            throw Error("checkpoint holds tensor '" + name +
                        "' which the model does not have");
        }
        if (!p->value.same_shape(value)) {
            throw ShapeError("checkpoint tensor '" + name + "' has shape " +
                             ad::shape_str(value.shape) + " but the model expects " +
                             ad::shape_str(p->value.shape));
        }
        seen.insert(name);
    }
    for (std::size_t i = 0; i < store.size(); ++i) {
        if (seen.count(store[i].name) == 0) {
            throw Error("checkpoint is missing tensor '" + store[i].name + "'");
        }
    }
    // All validated; copy in a second pass so a failed apply never leaves a
    // half-updated store.
    for (const auto& [name, value] : ck.tensors) {
        store.find(name)->value = value;
    }
}

}  // namespace cta::checkpoint
