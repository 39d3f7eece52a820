#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "lcgap/errors.hpp"
#include "lcgap/molecule.hpp"
#include "lcgap/parallel.hpp"

namespace lcgap {

enum class DescriptorKind { localized, decaying, reduced, global_reference };

inline std::string to_string(DescriptorKind k) {
    switch (k) {
    case DescriptorKind::localized: return "localized";
    case DescriptorKind::decaying: return "decaying";
    case DescriptorKind::reduced: return "reduced";
    default: return "global_reference";
    }
}

inline DescriptorKind descriptor_kind_from_string(const std::string& s) {
    if (s == "localized") return DescriptorKind::localized;
    if (s == "decaying") return DescriptorKind::decaying;
    if (s == "reduced") return DescriptorKind::reduced;
    if (s == "global_reference") return DescriptorKind::global_reference;
    throw ConfigError("unknown descriptor kind: '" + s + "'");
}

// The 0.5 * Z^2.4 diagonal is a fixed part of the matrix definition, not a
// tunable parameter.
inline constexpr double diagonal_exponent = 2.4;
inline constexpr double diagonal_factor = 0.5;

// Real atoms closer than this are rejected; the inverse-distance entries
// would blow up. Physical data never comes near it.
inline constexpr double min_atom_separation = 1e-6;

struct DescriptorConfig {
    DescriptorKind kind = DescriptorKind::reduced;
    double alpha = 1.0;      // localization exponent
    double r_cut = 5.0;      // cutoff radius, dataset length units
    int max_occupancy = 1;   // m: central atom + neighbors + dummy padding

    void validate() const {
        if (kind == DescriptorKind::global_reference) return; // alpha fixed, r_cut/m unused
        if (alpha <= 0) throw ConfigError("descriptor alpha must be > 0");
        if (r_cut <= 0) throw ConfigError("descriptor r_cut must be > 0");
        if (max_occupancy < 1) throw ConfigError("descriptor max_occupancy must be >= 1");
    }
};

// Descriptor vector length for a given kind and occupancy bound.
inline std::size_t descriptor_length(DescriptorKind kind, int m) {
    const auto mm = static_cast<std::size_t>(m);
    switch (kind) {
    case DescriptorKind::localized:
    case DescriptorKind::decaying:
        return mm * (mm + 1) / 2;
    case DescriptorKind::reduced:
        return 2 * mm - 1;
    default:
        throw ConfigError("global_reference has no per-atom descriptor length");
    }
}

// Local view of one atom's environment. members[0] is the central atom;
// the others are every atom within r_cut, ordered by ascending distance to
// the center (ties by ascending original atom index). Dummy padding up to
// padded_size is implicit: only real members are stored.
struct Neighborhood {
    int center_index = 0;
    std::vector<int> member_z;
    std::vector<Vec3> member_r;
    int padded_size = 0; // m

    int occupancy() const { return static_cast<int>(member_z.size()); } // K + 1
};

struct NeighborhoodDescriptor {
    DescriptorKind kind = DescriptorKind::reduced;
    std::vector<double> values;
};

inline Neighborhood extract_neighborhood(const Molecule& mol, int center,
                                         const DescriptorConfig& cfg) {
    const auto n = mol.size();
    if (center < 0 || static_cast<std::size_t>(center) >= n) {
        throw DataError("atom index " + std::to_string(center) + " out of range for molecule '" +
                        mol.id + "' (" + std::to_string(n) + " atoms)");
    }
    const auto c = static_cast<std::size_t>(center);
    std::vector<std::pair<double, std::size_t>> within;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == c) continue;
        const double dist = distance(mol.coordinates[c], mol.coordinates[j]);
        if (dist <= cfg.r_cut) within.emplace_back(dist, j);
    }
    std::sort(within.begin(), within.end());
    if (within.size() + 1 > static_cast<std::size_t>(cfg.max_occupancy)) {
        throw DataError("molecule '" + mol.id + "': atom " + std::to_string(center) + " has " +
                        std::to_string(within.size()) + " neighbors within r_cut=" +
                        std::to_string(cfg.r_cut) + ", exceeding max_occupancy " +
                        std::to_string(cfg.max_occupancy) + " (m too small)");
    }
    Neighborhood nb;
    nb.center_index = center;
    nb.padded_size = cfg.max_occupancy;
    nb.member_z.reserve(within.size() + 1);
    nb.member_r.reserve(within.size() + 1);
    nb.member_z.push_back(mol.atomic_numbers[c]);
    nb.member_r.push_back(mol.coordinates[c]);
    for (const auto& [dist, j] : within) {
        nb.member_z.push_back(mol.atomic_numbers[j]);
        nb.member_r.push_back(mol.coordinates[j]);
    }
    return nb;
}

namespace detail {

inline double guarded_distance(const Vec3& a, const Vec3& b, int j, int k) {
    const double d = distance(a, b);
    if (d < min_atom_separation) {
        throw DataError("coincident atoms: neighborhood members " + std::to_string(j) + " and " +
                        std::to_string(k) + " are closer than " +
                        std::to_string(min_atom_separation));
    }
    return d;
}

} // namespace detail

// m x m matrix with diagonal 0.5 * Z^2.4 and off-diagonal Z_j Z_k / d_jk^alpha.
// Rows and columns of dummy atoms are exactly zero; no distance involving a
// dummy atom is ever evaluated.
inline Eigen::MatrixXd localized_matrix(const Neighborhood& nb, const DescriptorConfig& cfg) {
    const int m = nb.padded_size;
    const int real = nb.occupancy();
    Eigen::MatrixXd mat = Eigen::MatrixXd::Zero(m, m);
    for (int j = 0; j < real; ++j) {
        mat(j, j) = diagonal_factor * std::pow(static_cast<double>(nb.member_z[static_cast<std::size_t>(j)]),
                                               diagonal_exponent);
        for (int k = j + 1; k < real; ++k) {
            const double d = detail::guarded_distance(nb.member_r[static_cast<std::size_t>(j)],
                                                      nb.member_r[static_cast<std::size_t>(k)], j, k);
            const double v = nb.member_z[static_cast<std::size_t>(j)] *
                             nb.member_z[static_cast<std::size_t>(k)] / std::pow(d, cfg.alpha);
            mat(j, k) = v;
            mat(k, j) = v;
        }
    }
    return mat;
}

// m x m matrix whose (1,1) entry is 0.5 * Z^2.4 and every other real entry is
// Z_j Z_k / (d_1j + d_1k + d_jk)^alpha. The added center distances damp the
// jump when an atom crosses the cutoff boundary.
inline Eigen::MatrixXd decaying_matrix(const Neighborhood& nb, const DescriptorConfig& cfg) {
    const int m = nb.padded_size;
    const int real = nb.occupancy();
    Eigen::MatrixXd mat = Eigen::MatrixXd::Zero(m, m);
    if (real > 0) {
        mat(0, 0) = diagonal_factor * std::pow(static_cast<double>(nb.member_z[0]), diagonal_exponent);
    }
    std::vector<double> center_dist(static_cast<std::size_t>(real), 0.0);
    for (int j = 1; j < real; ++j) {
        center_dist[static_cast<std::size_t>(j)] =
            detail::guarded_distance(nb.member_r[0], nb.member_r[static_cast<std::size_t>(j)], 0, j);
    }
    for (int j = 0; j < real; ++j) {
        for (int k = j; k < real; ++k) {
            if (j == 0 && k == 0) continue;
            const double d_jk = j == k ? 0.0
                                       : detail::guarded_distance(nb.member_r[static_cast<std::size_t>(j)],
                                                                  nb.member_r[static_cast<std::size_t>(k)],
                                                                  j, k);
            const double denom = center_dist[static_cast<std::size_t>(j)] +
                                 center_dist[static_cast<std::size_t>(k)] + d_jk;
            const double v = nb.member_z[static_cast<std::size_t>(j)] *
                             nb.member_z[static_cast<std::size_t>(k)] / std::pow(denom, cfg.alpha);
            mat(j, k) = v;
            mat(k, j) = v;
        }
    }
    return mat;
}

// Symmetric permutation fixing row/column 0 (the central atom) and ordering
// the rest by descending Euclidean row norm. Stable; ties keep ascending
// pre-permutation index. Dummy rows have norm 0 and land last. Returns the
// permuted matrix and the permutation (slot -> original index).
inline std::pair<Eigen::MatrixXd, std::vector<int>> permute_by_row_norm(const Eigen::MatrixXd& mat) {
    const int m = static_cast<int>(mat.rows());
    std::vector<int> perm(static_cast<std::size_t>(m));
    std::iota(perm.begin(), perm.end(), 0);
    // Row norms are invariant under a symmetric permutation, so sorting on the
    // input matrix's norms is sorting on the permuted matrix's norms.
    std::vector<double> norms(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) norms[static_cast<std::size_t>(j)] = mat.row(j).norm();
    std::stable_sort(perm.begin() + 1, perm.end(), [&](int a, int b) {
        return norms[static_cast<std::size_t>(a)] > norms[static_cast<std::size_t>(b)];
    });
    Eigen::MatrixXd out(m, m);
    for (int j = 0; j < m; ++j) {
        for (int k = 0; k < m; ++k) {
            out(j, k) = mat(perm[static_cast<std::size_t>(j)], perm[static_cast<std::size_t>(k)]);
        }
    }
    return {std::move(out), std::move(perm)};
}

// Row-wise upper-triangular packing (M11, M12, ..., M1m, M22, ..., Mmm).
inline std::vector<double> pack_upper_triangle(const Eigen::MatrixXd& mat) {
    const int m = static_cast<int>(mat.rows());
    if (mat.cols() != m) throw std::invalid_argument("pack_upper_triangle: matrix not square");
    for (int j = 0; j < m; ++j) {
        for (int k = j + 1; k < m; ++k) {
            const double diff = std::abs(mat(j, k) - mat(k, j));
            const double scale = std::max({1.0, std::abs(mat(j, k)), std::abs(mat(k, j))});
            if (diff > 1e-12 * scale) {
                throw std::invalid_argument("pack_upper_triangle: matrix not symmetric at (" +
                                            std::to_string(j) + "," + std::to_string(k) + ")");
            }
        }
    }
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m) * (static_cast<std::size_t>(m) + 1) / 2);
    for (int j = 0; j < m; ++j) {
        for (int k = j; k < m; ++k) out.push_back(mat(j, k));
    }
    return out;
}

// First row plus trailing diagonal of the decaying matrix, built on the
// distance-to-center member ordering with no row-norm permutation.
inline NeighborhoodDescriptor reduced_descriptor(const Neighborhood& nb,
                                                 const DescriptorConfig& cfg) {
    const Eigen::MatrixXd mat = decaying_matrix(nb, cfg);
    const int m = nb.padded_size;
    NeighborhoodDescriptor desc;
    desc.kind = DescriptorKind::reduced;
    desc.values.reserve(static_cast<std::size_t>(2 * m - 1));
    for (int k = 0; k < m; ++k) desc.values.push_back(mat(0, k));
    for (int j = 1; j < m; ++j) desc.values.push_back(mat(j, j));
    return desc;
}

// Neighborhood descriptor for atom `center` of `mol` under `cfg`.
inline NeighborhoodDescriptor compute_descriptor(const Molecule& mol, int center,
                                                 const DescriptorConfig& cfg) {
    if (cfg.kind == DescriptorKind::global_reference) {
        throw ConfigError("global_reference is a whole-molecule oracle, not a neighborhood descriptor");
    }
    const Neighborhood nb = extract_neighborhood(mol, center, cfg);
    NeighborhoodDescriptor desc;
    desc.kind = cfg.kind;
    switch (cfg.kind) {
    case DescriptorKind::localized:
        desc.values = pack_upper_triangle(permute_by_row_norm(localized_matrix(nb, cfg)).first);
        break;
    case DescriptorKind::decaying:
        desc.values = pack_upper_triangle(permute_by_row_norm(decaying_matrix(nb, cfg)).first);
        break;
    case DescriptorKind::reduced:
        desc.values = reduced_descriptor(nb, cfg).values;
        break;
    default:
        throw ConfigError("global_reference is a whole-molecule oracle, not a neighborhood descriptor");
    }
    for (double v : desc.values) {
        if (!std::isfinite(v)) {
            throw NumericError("non-finite descriptor entry for molecule '" + mol.id + "', atom " +
                               std::to_string(center));
        }
    }
    return desc;
}

// Whole-molecule Coulomb matrix. Reference oracle only; the GAP pipeline
// never consumes it.
inline Eigen::MatrixXd global_coulomb_matrix(const Molecule& mol) {
    const int n = static_cast<int>(mol.size());
    Eigen::MatrixXd mat(n, n);
    for (int i = 0; i < n; ++i) {
        mat(i, i) = diagonal_factor *
                    std::pow(static_cast<double>(mol.atomic_numbers[static_cast<std::size_t>(i)]),
                             diagonal_exponent);
        for (int j = i + 1; j < n; ++j) {
            const double d = detail::guarded_distance(mol.coordinates[static_cast<std::size_t>(i)],
                                                      mol.coordinates[static_cast<std::size_t>(j)], i, j);
            const double v = mol.atomic_numbers[static_cast<std::size_t>(i)] *
                             mol.atomic_numbers[static_cast<std::size_t>(j)] / d;
            mat(i, j) = v;
            mat(j, i) = v;
        }
    }
    return mat;
}

// Largest neighbor count in the dataset at cfg.r_cut, plus the central atom,
// plus a headroom margin for unseen prediction systems.
inline int auto_max_occupancy(const Dataset& d, const DescriptorConfig& cfg, int margin = 2,
                              int workers = 1) {
    if (cfg.r_cut <= 0) throw ConfigError("auto_max_occupancy requires r_cut > 0");
    if (margin < 0) throw ConfigError("occupancy margin must be >= 0");
    std::vector<int> per_molecule(d.size(), 0);
    parallel_for(d.size(), workers, [&](std::size_t mi) {
        const auto& mol = d.molecules[mi];
        int worst = 0;
        for (std::size_t i = 0; i < mol.size(); ++i) {
            int count = 0;
            for (std::size_t j = 0; j < mol.size(); ++j) {
                if (j != i && distance(mol.coordinates[i], mol.coordinates[j]) <= cfg.r_cut) ++count;
            }
            worst = std::max(worst, count);
        }
        per_molecule[mi] = worst;
    });
    int max_neighbors = 0;
    for (int v : per_molecule) max_neighbors = std::max(max_neighbors, v);
    return 1 + max_neighbors + margin;
}

} // namespace lcgap
