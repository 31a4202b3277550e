#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pcdf/errors.hpp"

namespace pcdf {

/// One named slice of a flat parameter vector (a weight matrix or bias).
/// Gradient clipping and serialization operate per group.
struct ParamGroup {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;  // 1 for vectors
    std::size_t offset = 0;

    std::size_t count() const noexcept { return rows * cols; }
};

/// Flat parameter storage plus its shape manifest.
struct ParamVec {
    std::vector<double> values;
    std::vector<ParamGroup> groups;

    std::size_t add_group(const std::string& name, std::size_t rows, std::size_t cols) {
        ParamGroup g{name, rows, cols, values.size()};
        groups.push_back(g);
        values.resize(values.size() + g.count(), 0.0);
        return groups.size() - 1;
    }

    std::span<double> group(std::size_t index) {
        const auto& g = groups.at(index);
        return {values.data() + g.offset, g.count()};
    }
    std::span<const double> group(std::size_t index) const {
        const auto& g = groups.at(index);
        return {values.data() + g.offset, g.count()};
    }
    std::span<double> group(std::string_view name) { return group(index_of(name)); }
    std::span<const double> group(std::string_view name) const { return group(index_of(name)); }

    std::size_t index_of(std::string_view name) const {
        for (std::size_t i = 0; i < groups.size(); ++i)
            if (groups[i].name == name) return i;
        throw ArgumentError("ParamVec: no group named '" + std::string(name) + "'");
    }

    std::size_t size() const noexcept { return values.size(); }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool same_manifest(const ParamVec& other) const {
        if (groups.size() != other.groups.size()) return false;
        for (std::size_t i = 0; i < groups.size(); ++i) {
            const auto& a = groups[i];
            const auto& b = other.groups[i];
            if (a.name != b.name || a.rows != b.rows || a.cols != b.cols || a.offset != b.offset)
                return false;
        }
        return true;
    }
};

}  // namespace pcdf
