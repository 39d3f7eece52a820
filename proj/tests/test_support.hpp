#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "lcgap/lcgap.hpp"

// Deterministic generators and independent numerical oracles shared by the
// unit tests and the acceptance suite. The oracles deliberately avoid the
// library's covariance/Cholesky code paths.
namespace lcgap::testutil {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

// Uniform draw snapped to a 2^-10 grid. Sums and differences of such values
// stay exactly representable well past the coordinate ranges used here, which
// makes translation-invariance checks exact instead of ulp-fuzzy.
inline double uniform_grid(std::mt19937_64& rng, double lo, double hi) {
    const double v = uniform(rng, lo, hi);
    return std::round(v * 1024.0) * 0x1.0p-10;
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
    return lo + static_cast<int>(lcgap::detail::bounded_rand(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

struct MolGenOptions {
    int min_atoms = 3;
    int max_atoms = 12;
    std::vector<int> z_choices = {1, 6, 7, 8, 16, 17};
    double box = 6.0;
    double min_separation = 0.7;
};

inline Molecule random_molecule(std::mt19937_64& rng, const MolGenOptions& opt,
                                const std::string& id) {
    Molecule mol;
    mol.id = id;
    const int n = uniform_int(rng, opt.min_atoms, opt.max_atoms);
    while (static_cast<int>(mol.size()) < n) {
        Vec3 r{uniform_grid(rng, 0.0, opt.box), uniform_grid(rng, 0.0, opt.box),
               uniform_grid(rng, 0.0, opt.box)};
        bool ok = true;
        for (const auto& existing : mol.coordinates) {
            if (distance(existing, r) < opt.min_separation) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        mol.coordinates.push_back(r);
        mol.atomic_numbers.push_back(
            opt.z_choices[static_cast<std::size_t>(uniform_int(
                rng, 0, static_cast<int>(opt.z_choices.size()) - 1))]);
    }
    return mol;
}

// Random molecules with a smooth synthetic target (sum over atoms of a mild
// per-element term plus coordination flavor), plus uniform targets noise-free.
inline Dataset random_dataset(std::uint64_t seed, int count, const MolGenOptions& opt = {},
                              const std::string& target = "energy") {
    std::mt19937_64 rng(seed);
    Dataset d;
    d.source_name = "synthetic";
    for (int i = 0; i < count; ++i) {
        Molecule mol = random_molecule(rng, opt, "mol" + std::to_string(i));
        double value = 0.0;
        for (std::size_t a = 0; a < mol.size(); ++a) {
            value -= 10.0 * std::sqrt(static_cast<double>(mol.atomic_numbers[a]));
            for (std::size_t b = a + 1; b < mol.size(); ++b) {
                value += 1.0 / (1.0 + distance(mol.coordinates[a], mol.coordinates[b]));
            }
        }
        mol.properties[target] = value;
        d.molecules.push_back(std::move(mol));
    }
    return d;
}

inline Vec3 apply_matrix(const Eigen::Matrix3d& q, const Vec3& r) {
    const Eigen::Vector3d v = q * Eigen::Vector3d(r[0], r[1], r[2]);
    return {v.x(), v.y(), v.z()};
}

inline Eigen::Matrix3d random_orthogonal(std::mt19937_64& rng) {
    Eigen::Matrix3d a;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) a(i, j) = uniform(rng, -1.0, 1.0);
    }
    const Eigen::HouseholderQR<Eigen::Matrix3d> qr(a);
    return qr.householderQ();
}

// --- oracles ---------------------------------------------------------------

inline double kernel_oracle(const std::vector<double>& x, const std::vector<double>& y,
                            const KernelParams& kp) {
    double l1 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) l1 += std::abs(x[i] - y[i]);
    return kp.sigma * kp.sigma * std::exp(-l1 / (kp.length_scale * kp.length_scale));
}

inline std::vector<double> atom_vector(const DescriptorGroup& g, int i) {
    const auto row = g.atom(i);
    return {row.begin(), row.end()};
}

inline double covariance_oracle(const DescriptorGroup& a, const DescriptorGroup& b,
                                const KernelParams& kp) {
    double sum = 0.0;
    for (int i = 0; i < a.atom_count; ++i) {
        for (int j = 0; j < b.atom_count; ++j) {
            sum += kernel_oracle(atom_vector(a, i), atom_vector(b, j), kp);
        }
    }
    return sum;
}

inline Eigen::MatrixXd gram_oracle(const std::vector<DescriptorGroup>& groups,
                                   const KernelParams& kp, double noise_var) {
    const auto m = static_cast<Eigen::Index>(groups.size());
    Eigen::MatrixXd k(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            k(i, j) = covariance_oracle(groups[static_cast<std::size_t>(i)],
                                        groups[static_cast<std::size_t>(j)], kp);
        }
    }
    for (Eigen::Index i = 0; i < m; ++i) k(i, i) += noise_var;
    return k;
}

// NLL by dense symmetric eigendecomposition: no Cholesky involved.
inline double nll_oracle(const Eigen::MatrixXd& k, const Eigen::VectorXd& y) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    const Eigen::VectorXd lambda = es.eigenvalues();
    const Eigen::VectorXd z = es.eigenvectors().transpose() * y;
    double quad = 0.0;
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        quad += z(i) * z(i) / lambda(i);
        logdet += std::log(lambda(i));
    }
    return 0.5 * quad + 0.5 * logdet +
           0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
}

inline double rel_diff(double a, double b) {
    const double scale = std::max({1e-300, std::abs(a), std::abs(b)});
    return std::abs(a - b) / scale;
}

} // namespace lcgap::testutil
