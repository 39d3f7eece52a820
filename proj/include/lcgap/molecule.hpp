#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "lcgap/errors.hpp"

namespace lcgap {

using Vec3 = std::array<double, 3>;

inline double distance(const Vec3& a, const Vec3& b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    const double dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

enum class LengthUnit { angstrom, bohr, unspecified };

inline std::string to_string(LengthUnit u) {
    switch (u) {
    case LengthUnit::angstrom: return "angstrom";
    case LengthUnit::bohr: return "bohr";
    default: return "unspecified";
    }
}

inline LengthUnit length_unit_from_string(const std::string& s) {
    if (s == "angstrom") return LengthUnit::angstrom;
    if (s == "bohr") return LengthUnit::bohr;
    if (s == "unspecified" || s.empty()) return LengthUnit::unspecified;
    throw DataError("unknown length unit: '" + s + "'");
}

// One atomic system: coordinates, species, and named scalar properties.
// Atomic numbers are >= 1 on ingest; Z=0 is reserved for the dummy padding
// atoms used internally by the descriptors.
struct Molecule {
    std::string id;
    std::vector<int> atomic_numbers;
    std::vector<Vec3> coordinates;
    std::map<std::string, double> properties;

    std::size_t size() const { return atomic_numbers.size(); }

    bool has_property(const std::string& name) const {
        return properties.find(name) != properties.end();
    }

    double property(const std::string& name) const {
        auto it = properties.find(name);
        if (it == properties.end()) {
            throw DataError("molecule '" + id + "' has no property '" + name + "'");
        }
        return it->second;
    }
};

// Checks the Molecule invariants; `context` names the record for error messages.
inline void validate_molecule(const Molecule& m, const std::string& context = {}) {
    const std::string where = context.empty() ? ("molecule '" + m.id + "'") : context;
    if (m.atomic_numbers.size() != m.coordinates.size()) {
        throw DataError(where + ": atom count mismatch (" +
                        std::to_string(m.atomic_numbers.size()) + " atomic numbers vs " +
                        std::to_string(m.coordinates.size()) + " coordinates)");
    }
    if (m.size() < 1) throw DataError(where + ": molecule has no atoms");
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m.atomic_numbers[i] < 1) {
            throw DataError(where + ": atom " + std::to_string(i) + " has atomic number " +
                            std::to_string(m.atomic_numbers[i]) + " (must be >= 1)");
        }
    }
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = i + 1; j < m.size(); ++j) {
            if (m.coordinates[i] == m.coordinates[j]) {
                throw DataError(where + ": atoms " + std::to_string(i) + " and " +
                                std::to_string(j) + " share identical coordinates");
            }
        }
    }
}

struct Dataset {
    std::vector<Molecule> molecules;
    LengthUnit length_unit = LengthUnit::unspecified;
    std::string source_name;

    std::size_t size() const { return molecules.size(); }
};

inline void validate_dataset(const Dataset& d) {
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < d.size(); ++i) {
        validate_molecule(d.molecules[i], "record " + std::to_string(i) +
                                              " (id='" + d.molecules[i].id + "')");
        if (!seen.insert(d.molecules[i].id).second) {
            throw DataError("duplicate molecule id '" + d.molecules[i].id + "'");
        }
    }
}

// All non-hydrogen atoms count as heavy.
inline int heavy_atom_count(const Molecule& m) {
    int n = 0;
    for (int z : m.atomic_numbers) {
        if (z >= 2) ++n;
    }
    return n;
}

// Molecules with at most n heavy atoms, order preserved. Named "<source>_<n>".
inline Dataset subset_by_max_heavy_atoms(const Dataset& d, int n) {
    if (n < 1) throw ConfigError("heavy-atom bound must be >= 1, got " + std::to_string(n));
    Dataset out;
    out.length_unit = d.length_unit;
    out.source_name = d.source_name + "_" + std::to_string(n);
    for (const auto& m : d.molecules) {
        if (heavy_atom_count(m) <= n) out.molecules.push_back(m);
    }
    return out;
}

struct TransferabilitySplit {
    Dataset train;
    Dataset test;
    bool degenerate = false; // empty train or empty test
};

// Train on molecules with <= n heavy atoms, test on the complement.
inline TransferabilitySplit transferability_split(const Dataset& d, int n) {
    if (n < 1) throw ConfigError("heavy-atom bound must be >= 1, got " + std::to_string(n));
    TransferabilitySplit s;
    s.train.length_unit = s.test.length_unit = d.length_unit;
    s.train.source_name = d.source_name + "_" + std::to_string(n);
    s.test.source_name = d.source_name + "_gt" + std::to_string(n);
    for (const auto& m : d.molecules) {
        if (heavy_atom_count(m) <= n) {
            s.train.molecules.push_back(m);
        } else {
            s.test.molecules.push_back(m);
        }
    }
    s.degenerate = s.train.molecules.empty() || s.test.molecules.empty();
    return s;
}

struct FoldAssignment {
    int fold_count = 0;
    std::vector<int> assignment; // molecule index -> fold in [0, fold_count)
    std::uint64_t seed = 0;

    std::vector<std::size_t> fold_indices(int fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignment.size(); ++i) {
            if (assignment[i] == fold) out.push_back(i);
        }
        return out;
    }
};

namespace detail {

// Unbiased bounded draw by rejection. mt19937_64's output sequence is pinned
// by the standard, so the shuffle below is reproducible across platforms
// (std::uniform_int_distribution is not).
inline std::uint64_t bounded_rand(std::mt19937_64& gen, std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        const std::uint64_t r = gen();
        if (r >= threshold) return r % bound;
    }
}

} // namespace detail

// Deterministic seeded shuffle followed by round-robin assignment.
// Fold sizes differ by at most one and every fold is non-empty for |d| >= k.
inline FoldAssignment make_folds(const Dataset& d, int k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("fold count must be >= 2, got " + std::to_string(k));
    const std::size_t n = d.size();
    if (n < static_cast<std::size_t>(k)) {
        throw DataError("cannot make " + std::to_string(k) + " folds from " +
                        std::to_string(n) + " molecules");
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 gen(seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t j = detail::bounded_rand(gen, i + 1);
        std::swap(order[i], order[j]);
    }
    FoldAssignment fa;
    fa.fold_count = k;
    fa.seed = seed;
    fa.assignment.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        fa.assignment[order[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
    }
    return fa;
}

} // namespace lcgap
