// Checkpoint container: magic, format version, config hash, then named
// sections as (name, dtype, dims, little-endian payload). Deliberately flat
// so any language can parse it; save -> load -> save is byte-identical.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace trigflow {

struct CkptSection {
    enum class Dtype : uint8_t { f64 = 0, u64 = 1, bytes = 2 };
    Dtype dtype = Dtype::f64;
    std::vector<uint32_t> dims;
    std::vector<double> f64;
    std::vector<uint64_t> u64;
    std::string bytes;

    static CkptSection from_f64(std::vector<double> v);
    static CkptSection from_u64(std::vector<uint64_t> v);
    static CkptSection from_bytes(std::string s);
};

struct Checkpoint {
    uint32_t version = 1;
    uint64_t config_hash = 0;
    // insertion-ordered
    std::vector<std::pair<std::string, CkptSection>> sections;

    void put(const std::string& name, CkptSection s);
    const CkptSection& get(const std::string& name) const;
    bool has(const std::string& name) const;
};

uint64_t fnv1a64(const std::string& s);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
// throws on bad magic/version; when expect_hash != 0 also on hash mismatch
Checkpoint load_checkpoint(const std::string& path, uint64_t expect_hash = 0);

} // namespace trigflow
