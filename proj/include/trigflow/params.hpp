// Flat f64 parameter store with named sections. Optimizer, EMA and
// checkpoint code all operate on the single contiguous buffer.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "trigflow/dual.hpp"
#include "trigflow/tape.hpp"
#include "trigflow/tensor.hpp"

namespace trigflow {

class ParamStore {
public:
    struct Section {
        std::string name;
        int rows = 0, cols = 0;
        size_t offset = 0;
    };

    int add(const std::string& name, int rows, int cols) {
        Section s{name, rows, cols, data.size()};
        sections.push_back(s);
        data.resize(data.size() + size_t(rows) * size_t(cols), 0.0);
        return int(sections.size()) - 1;
    }

    int slot(const std::string& name) const {
        for (size_t i = 0; i < sections.size(); ++i)
            if (sections[i].name == name) return int(i);
        throw std::invalid_argument("ParamStore: no section named " + name);
    }

    Tensor get(int s) const {
        const Section& sec = sections[s];
        Tensor t(sec.rows, sec.cols);
        std::copy(data.begin() + sec.offset, data.begin() + sec.offset + t.size(), t.d.begin());
        return t;
    }

    void set(int s, const Tensor& t) {
        const Section& sec = sections[s];
        if (t.rows != sec.rows || t.cols != sec.cols)
            throw std::invalid_argument("ParamStore::set: shape mismatch for " + sec.name);
        std::copy(t.d.begin(), t.d.end(), data.begin() + sec.offset);
    }

    std::vector<std::pair<int, int>> shapes() const {
        std::vector<std::pair<int, int>> out;
        out.reserve(sections.size());
        for (const auto& s : sections) out.emplace_back(s.rows, s.cols);
        return out;
    }

    size_t size() const { return data.size(); }

    std::vector<Section> sections;
    std::vector<double> data;
};

// materialize every section in the mode's value type
inline std::vector<Tensor> as_tensors(const ParamStore& p) {
    std::vector<Tensor> out;
    out.reserve(p.sections.size());
    for (size_t i = 0; i < p.sections.size(); ++i) out.push_back(p.get(int(i)));
    return out;
}

inline std::vector<DualTensor> as_duals(const ParamStore& p) {
    std::vector<DualTensor> out;
    out.reserve(p.sections.size());
    for (size_t i = 0; i < p.sections.size(); ++i) out.push_back(DualTensor::constant(p.get(int(i))));
    return out;
}

inline std::vector<Var> as_leaves(const ParamStore& p, Tape& tape) {
    std::vector<Var> out;
    out.reserve(p.sections.size());
    for (size_t i = 0; i < p.sections.size(); ++i) out.push_back(tape.leaf(p.get(int(i))));
    return out;
}

} // namespace trigflow
