// Copyright (c) 2026 MDIQA authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdiqa {

// Ordered dimension taxonomy. The concatenated order (technical first, then
// aesthetic) defines the index layout of every score and weight vector in the
// model; all modules address dimensions through this bijection.
struct DimensionRegistry {
    std::vector<std::string> technical;
    std::vector<std::string> aesthetic;

    int count() const { return static_cast<int>(technical.size() + aesthetic.size()); }
    int technical_count() const { return static_cast<int>(technical.size()); }
    int aesthetic_count() const { return static_cast<int>(aesthetic.size()); }

    std::vector<std::string> all() const {
        std::vector<std::string> out = technical;
        out.insert(out.end(), aesthetic.begin(), aesthetic.end());
        return out;
    }

    const std::string& name(int idx) const {
        const int t = technical_count();
        if (idx < 0 || idx >= count()) throw std::out_of_range("dimension index out of range");
        return idx < t ? technical[static_cast<std::size_t>(idx)]
                       : aesthetic[static_cast<std::size_t>(idx - t)];
    }

    bool is_technical(int idx) const { return idx < technical_count(); }

    int index_of(const std::string& nm) const {
        for (int i = 0; i < count(); ++i)
            if (name(i) == nm) return i;
        throw std::invalid_argument("unknown dimension name: " + nm);
    }

    bool contains(const std::string& nm) const {
        for (int i = 0; i < count(); ++i)
            if (name(i) == nm) return true;
        return false;
    }

    void validate() const {
        if (technical.empty() && aesthetic.empty())
            throw std::invalid_argument("DimensionRegistry: no dimensions defined");
        std::set<std::string> seen;
        for (const auto& n : all()) {
            if (n.empty()) throw std::invalid_argument("DimensionRegistry: empty dimension name");
            if (!seen.insert(n).second)
                throw std::invalid_argument("DimensionRegistry: duplicate dimension name: " + n);
        }
    }
};

// Five technical attributes plus four default aesthetic attributes.
inline DimensionRegistry default_registry() {
    DimensionRegistry reg;
    reg.technical = {"sharpness", "noisiness", "brightness", "contrast", "colorfulness"};
    reg.aesthetic = {"composition", "light", "color", "content"};
    return reg;
}

}  // namespace mdiqa
