#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "lcgap/descriptor.hpp"
#include "lcgap/errors.hpp"
#include "lcgap/molecule.hpp"
#include "lcgap/parallel.hpp"

namespace lcgap {

struct KernelParams {
    double sigma = 1.0;        // signal amplitude, target units
    double length_scale = 1.0; // enters the kernel as length_scale^2

    void validate() const {
        if (!(sigma > 0)) throw ConfigError("kernel sigma must be > 0");
        if (!(length_scale > 0)) throw ConfigError("kernel length_scale must be > 0");
    }
};

struct NoiseModel {
    double sigma_n = 0.1; // per-molecule observation noise std deviation

    void validate() const {
        if (sigma_n < 0) throw ConfigError("noise sigma_n must be >= 0");
    }
};

// sigma^2 * exp(-|x - y|_1 / length_scale^2)
inline double laplacian_kernel(std::span<const double> x, std::span<const double> y,
                               const KernelParams& kp) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("laplacian_kernel: descriptor length mismatch (" +
                                    std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
    }
    double l1 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) l1 += std::abs(x[i] - y[i]);
    return kp.sigma * kp.sigma * std::exp(-l1 / (kp.length_scale * kp.length_scale));
}

// One molecule's atom descriptors, stored row-major (atom_count x dim).
struct DescriptorGroup {
    std::string molecule_id;
    int atom_count = 0;
    int dim = 0;
    std::vector<double> values;

    std::span<const double> atom(int i) const {
        return {values.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(dim),
                static_cast<std::size_t>(dim)};
    }
};

inline DescriptorGroup compute_descriptor_group(const Molecule& mol, const DescriptorConfig& cfg) {
    DescriptorGroup g;
    g.molecule_id = mol.id;
    g.atom_count = static_cast<int>(mol.size());
    g.dim = static_cast<int>(descriptor_length(cfg.kind, cfg.max_occupancy));
    g.values.reserve(static_cast<std::size_t>(g.atom_count) * static_cast<std::size_t>(g.dim));
    for (int i = 0; i < g.atom_count; ++i) {
        const auto desc = compute_descriptor(mol, i, cfg);
        g.values.insert(g.values.end(), desc.values.begin(), desc.values.end());
    }
    return g;
}

inline std::vector<DescriptorGroup> compute_descriptor_groups(const Dataset& d,
                                                              const DescriptorConfig& cfg,
                                                              int workers = 0) {
    cfg.validate();
    std::vector<DescriptorGroup> groups(d.size());
    parallel_for(d.size(), workers, [&](std::size_t i) {
        groups[i] = compute_descriptor_group(d.molecules[i], cfg);
    });
    return groups;
}

// Sum kernel between two molecules: every atom of A against every atom of B.
inline double molecular_covariance(const DescriptorGroup& a, const DescriptorGroup& b,
                                   const KernelParams& kp) {
    if (a.dim != b.dim) {
        throw std::invalid_argument("molecular_covariance: descriptor length mismatch (" +
                                    std::to_string(a.dim) + " vs " + std::to_string(b.dim) + ")");
    }
    const double inv_l2 = 1.0 / (kp.length_scale * kp.length_scale);
    const double sig2 = kp.sigma * kp.sigma;
    const auto dim = static_cast<std::size_t>(a.dim);
    double sum = 0.0;
    for (int i = 0; i < a.atom_count; ++i) {
        const double* ai = a.values.data() + static_cast<std::size_t>(i) * dim;
        for (int j = 0; j < b.atom_count; ++j) {
            const double* bj = b.values.data() + static_cast<std::size_t>(j) * dim;
            double l1 = 0.0;
            for (std::size_t c = 0; c < dim; ++c) l1 += std::abs(ai[c] - bj[c]);
            sum += std::exp(-l1 * inv_l2);
        }
    }
    return sig2 * sum;
}

// M x M Gram matrix K(G_i, G_j) + sigma_n^2 on the diagonal. Only the upper
// triangle is computed; the mirror guarantees exact symmetry.
inline Eigen::MatrixXd build_covariance_matrix(const std::vector<DescriptorGroup>& groups,
                                               const KernelParams& kp, const NoiseModel& noise,
                                               int workers = 0) {
    kp.validate();
    noise.validate();
    const auto m = static_cast<Eigen::Index>(groups.size());
    Eigen::MatrixXd cov(m, m);
    parallel_for_strided(groups.size(), workers, [&](std::size_t i) {
        for (std::size_t j = i; j < groups.size(); ++j) {
            cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                molecular_covariance(groups[i], groups[j], kp);
        }
    });
    const double noise_var = noise.sigma_n * noise.sigma_n;
    for (Eigen::Index i = 0; i < m; ++i) {
        cov(i, i) += noise_var;
        for (Eigen::Index j = i + 1; j < m; ++j) cov(j, i) = cov(i, j);
    }
    return cov;
}

} // namespace lcgap
