#include "trigflow/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace trigflow {

static const char kMagic[8] = {'T', 'F', 'C', 'K', 'P', 'T', '0', '1'};

CkptSection CkptSection::from_f64(std::vector<double> v) {
    CkptSection s;
    s.dtype = Dtype::f64;
    s.dims = {uint32_t(v.size())};
    s.f64 = std::move(v);
    return s;
}

CkptSection CkptSection::from_u64(std::vector<uint64_t> v) {
    CkptSection s;
    s.dtype = Dtype::u64;
    s.dims = {uint32_t(v.size())};
    s.u64 = std::move(v);
    return s;
}

CkptSection CkptSection::from_bytes(std::string b) {
    CkptSection s;
    s.dtype = Dtype::bytes;
    s.dims = {uint32_t(b.size())};
    s.bytes = std::move(b);
    return s;
}

void Checkpoint::put(const std::string& name, CkptSection s) {
    for (auto& kv : sections)
        if (kv.first == name) {
            kv.second = std::move(s);
            return;
        }
    sections.emplace_back(name, std::move(s));
}

const CkptSection& Checkpoint::get(const std::string& name) const {
    for (const auto& kv : sections)
        if (kv.first == name) return kv.second;
    throw std::runtime_error("checkpoint: missing section " + name);
}

bool Checkpoint::has(const std::string& name) const {
    for (const auto& kv : sections)
        if (kv.first == name) return true;
    return false;
}

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {
template <class T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}
} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    os.write(kMagic, sizeof(kMagic));
    write_pod(os, ckpt.version);
    write_pod(os, ckpt.config_hash);
    write_pod(os, uint32_t(ckpt.sections.size()));
    for (const auto& [name, sec] : ckpt.sections) {
        write_pod(os, uint32_t(name.size()));
        os.write(name.data(), std::streamsize(name.size()));
        write_pod(os, uint8_t(sec.dtype));
        write_pod(os, uint32_t(sec.dims.size()));
        for (uint32_t d : sec.dims) write_pod(os, d);
        switch (sec.dtype) {
            case CkptSection::Dtype::f64:
                os.write(reinterpret_cast<const char*>(sec.f64.data()),
                         std::streamsize(sec.f64.size() * sizeof(double)));
                break;
            case CkptSection::Dtype::u64:
                os.write(reinterpret_cast<const char*>(sec.u64.data()),
                         std::streamsize(sec.u64.size() * sizeof(uint64_t)));
                break;
            case CkptSection::Dtype::bytes:
                os.write(sec.bytes.data(), std::streamsize(sec.bytes.size()));
                break;
        }
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path, uint64_t expect_hash) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    Checkpoint ckpt;
    ckpt.version = read_pod<uint32_t>(is);
    if (ckpt.version != 1)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(ckpt.version));
    ckpt.config_hash = read_pod<uint64_t>(is);
    if (expect_hash != 0 && ckpt.config_hash != expect_hash)
        throw std::runtime_error("checkpoint: config hash mismatch for " + path);
    const uint32_t n = read_pod<uint32_t>(is);
    for (uint32_t i = 0; i < n; ++i) {
        const uint32_t name_len = read_pod<uint32_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        CkptSection sec;
        sec.dtype = CkptSection::Dtype(read_pod<uint8_t>(is));
        const uint32_t ndims = read_pod<uint32_t>(is);
        uint64_t count = 1;
        sec.dims.resize(ndims);
        for (uint32_t k = 0; k < ndims; ++k) {
            sec.dims[k] = read_pod<uint32_t>(is);
            count *= sec.dims[k];
        }
        if (ndims == 0) count = 0;
        switch (sec.dtype) {
            case CkptSection::Dtype::f64:
                sec.f64.resize(count);
                is.read(reinterpret_cast<char*>(sec.f64.data()), std::streamsize(count * sizeof(double)));
                break;
            case CkptSection::Dtype::u64:
                sec.u64.resize(count);
                is.read(reinterpret_cast<char*>(sec.u64.data()), std::streamsize(count * sizeof(uint64_t)));
                break;
            case CkptSection::Dtype::bytes:
                sec.bytes.resize(count);
                is.read(sec.bytes.data(), std::streamsize(count));
                break;
        }
        if (!is) throw std::runtime_error("checkpoint: truncated section " + name);
        ckpt.sections.emplace_back(std::move(name), std::move(sec));
    }
    return ckpt;
}

} // namespace trigflow
