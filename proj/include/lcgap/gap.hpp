#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "lcgap/descriptor.hpp"
#include "lcgap/errors.hpp"
#include "lcgap/kernel.hpp"
#include "lcgap/molecule.hpp"
#include "lcgap/parallel.hpp"

namespace lcgap {

// Trained sum-kernel GP regressor. Weights are per training molecule; the
// stored descriptor groups make prediction independent of the source files.
struct GapModel {
    DescriptorConfig descriptor_config;
    KernelParams kernel;
    NoiseModel noise;
    std::string target_name;
    double applied_jitter = 0.0;
    LengthUnit length_unit = LengthUnit::unspecified;
    std::vector<DescriptorGroup> training_groups;
    Eigen::VectorXd weights;
};

struct Prediction {
    double total = 0.0;
    std::vector<double> atomic_contributions;
};

struct TrainStats {
    int molecule_count = 0;
    int max_occupancy = 0;
    double applied_jitter = 0.0;
    double nll = 0.0;
};

struct SolveOptions {
    int workers = 0;
};

namespace detail {

// Diagonal increments tried when the plain factorization fails, as fractions
// of the mean diagonal magnitude trace(K)/M.
inline constexpr std::array<double, 8> jitter_ladder = {0.0,  1e-10, 1e-9, 1e-8,
                                                        1e-7, 1e-6,  1e-5, 1e-4};

struct Factorization {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 0.0;
};

inline Factorization factorize_with_jitter(const Eigen::MatrixXd& cov) {
    const auto m = cov.rows();
    const double scale = cov.trace() / static_cast<double>(m);
    Factorization f;
    for (double mult : jitter_ladder) {
        f.jitter = mult * scale;
        if (f.jitter == 0.0) {
            f.llt.compute(cov);
        } else {
            f.llt.compute(cov + f.jitter * Eigen::MatrixXd::Identity(m, m));
        }
        if (f.llt.info() == Eigen::Success) return f;
    }
    throw NumericError("covariance factorization failed even at maximum jitter " +
                       std::to_string(jitter_ladder.back() * scale) +
                       " (irreparably ill-conditioned system)");
}

inline double log_det_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

struct WeightSolve {
    Eigen::VectorXd weights;
    double nll = 0.0;
};

// Solves the factorized system for one target vector, with one
// iterative-refinement pass, and evaluates the marginal NLL from the factor.
inline WeightSolve solve_weights(const Eigen::MatrixXd& cov, const Factorization& fac,
                                 const Eigen::Ref<const Eigen::VectorXd>& y) {
    Eigen::VectorXd w = fac.llt.solve(y);
    const Eigen::VectorXd residual = y - cov * w - fac.jitter * w;
    w += fac.llt.solve(residual);
    const double nll = 0.5 * y.dot(w) + 0.5 * log_det_from_llt(fac.llt) +
                       0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
    return {std::move(w), nll};
}

inline std::vector<double> gather_targets(const Dataset& d, const std::string& target) {
    std::vector<double> y;
    y.reserve(d.size());
    for (const auto& mol : d.molecules) {
        if (!mol.has_property(target)) {
            throw DataError("molecule '" + mol.id + "' is missing target property '" + target + "'");
        }
        y.push_back(mol.properties.at(target));
    }
    return y;
}

} // namespace detail

// Solves (K + sigma_n^2 I [+ jitter I]) w = y on prebuilt descriptor groups.
inline GapModel train_from_groups(std::vector<DescriptorGroup> groups,
                                  const std::vector<double>& targets,
                                  const DescriptorConfig& cfg, const KernelParams& kp,
                                  const NoiseModel& noise, const SolveOptions& opts = {},
                                  TrainStats* stats = nullptr) {
    cfg.validate();
    kp.validate();
    noise.validate();
    if (groups.empty()) throw DataError("cannot train on an empty dataset");
    if (groups.size() != targets.size()) {
        throw std::invalid_argument("train_from_groups: group/target count mismatch");
    }
    const auto m = static_cast<Eigen::Index>(groups.size());
    const Eigen::MatrixXd cov = build_covariance_matrix(groups, kp, noise, opts.workers);
    const auto fac = detail::factorize_with_jitter(cov);
    const Eigen::Map<const Eigen::VectorXd> y(targets.data(), m);
    auto solve = detail::solve_weights(cov, fac, y);

    if (stats != nullptr) {
        stats->molecule_count = static_cast<int>(m);
        stats->max_occupancy = cfg.max_occupancy;
        stats->applied_jitter = fac.jitter;
        stats->nll = solve.nll;
    }
    GapModel model;
    model.descriptor_config = cfg;
    model.kernel = kp;
    model.noise = noise;
    model.applied_jitter = fac.jitter;
    model.training_groups = std::move(groups);
    model.weights = std::move(solve.weights);
    return model;
}

inline GapModel train(const Dataset& d, const std::string& target, const DescriptorConfig& cfg,
                      const KernelParams& kp, const NoiseModel& noise,
                      const SolveOptions& opts = {}, TrainStats* stats = nullptr) {
    const auto targets = detail::gather_targets(d, target);
    auto groups = compute_descriptor_groups(d, cfg, opts.workers);
    GapModel model = train_from_groups(std::move(groups), targets, cfg, kp, noise, opts, stats);
    model.target_name = target;
    model.length_unit = d.length_unit;
    return model;
}

// Per-atom energy of one query descriptor row against the whole training set.
inline double atomic_contribution(const std::vector<DescriptorGroup>& training_groups,
                                  const Eigen::VectorXd& weights, const KernelParams& kp,
                                  std::span<const double> query_atom) {
    const double inv_l2 = 1.0 / (kp.length_scale * kp.length_scale);
    const double sig2 = kp.sigma * kp.sigma;
    const std::size_t dim = query_atom.size();
    double total = 0.0;
    for (std::size_t gi = 0; gi < training_groups.size(); ++gi) {
        const auto& g = training_groups[gi];
        if (static_cast<std::size_t>(g.dim) != dim) {
            throw std::invalid_argument("atomic_contribution: descriptor length mismatch");
        }
        double ksum = 0.0;
        for (int j = 0; j < g.atom_count; ++j) {
            const double* row = g.values.data() + static_cast<std::size_t>(j) * dim;
            double l1 = 0.0;
            for (std::size_t c = 0; c < dim; ++c) l1 += std::abs(row[c] - query_atom[c]);
            ksum += std::exp(-l1 * inv_l2);
        }
        total += weights(static_cast<Eigen::Index>(gi)) * sig2 * ksum;
    }
    return total;
}

inline Prediction predict_group(const GapModel& model, const DescriptorGroup& query,
                                int workers = 1) {
    Prediction p;
    p.atomic_contributions.assign(static_cast<std::size_t>(query.atom_count), 0.0);
    parallel_for(static_cast<std::size_t>(query.atom_count), workers, [&](std::size_t k) {
        p.atomic_contributions[k] = atomic_contribution(model.training_groups, model.weights,
                                                        model.kernel, query.atom(static_cast<int>(k)));
    });
    // the total is defined as this exact sum, in atom-index order
    double total = 0.0;
    for (double c : p.atomic_contributions) total += c;
    p.total = total;
    return p;
}

inline Prediction predict(const GapModel& model, const Molecule& mol, int workers = 1) {
    const DescriptorGroup query = compute_descriptor_group(mol, model.descriptor_config);
    return predict_group(model, query, workers);
}

// Predictions for several weight vectors sharing one training set and kernel.
// The query-atom kernel sums are computed once; term order matches the
// single-set path exactly, so the results are bit-identical to it.
inline std::vector<Prediction> predict_group_multi(
    const std::vector<DescriptorGroup>& training_groups,
    const std::vector<Eigen::VectorXd>& weight_sets, const KernelParams& kp,
    const DescriptorGroup& query) {
    const double inv_l2 = 1.0 / (kp.length_scale * kp.length_scale);
    const double sig2 = kp.sigma * kp.sigma;
    const auto dim = static_cast<std::size_t>(query.dim);
    const std::size_t natoms = static_cast<std::size_t>(query.atom_count);
    std::vector<Prediction> out(weight_sets.size());
    for (auto& p : out) p.atomic_contributions.assign(natoms, 0.0);
    std::vector<double> ksums(training_groups.size());
    for (std::size_t k = 0; k < natoms; ++k) {
        const double* q = query.values.data() + k * dim;
        for (std::size_t gi = 0; gi < training_groups.size(); ++gi) {
            const auto& g = training_groups[gi];
            if (static_cast<std::size_t>(g.dim) != dim) {
                throw std::invalid_argument("predict_group_multi: descriptor length mismatch");
            }
            double ksum = 0.0;
            for (int j = 0; j < g.atom_count; ++j) {
                const double* row = g.values.data() + static_cast<std::size_t>(j) * dim;
                double l1 = 0.0;
                for (std::size_t c = 0; c < dim; ++c) l1 += std::abs(row[c] - q[c]);
                ksum += std::exp(-l1 * inv_l2);
            }
            ksums[gi] = ksum;
        }
        for (std::size_t p = 0; p < weight_sets.size(); ++p) {
            double total = 0.0;
            for (std::size_t gi = 0; gi < training_groups.size(); ++gi) {
                total += weight_sets[p](static_cast<Eigen::Index>(gi)) * sig2 * ksums[gi];
            }
            out[p].atomic_contributions[k] = total;
        }
    }
    for (auto& p : out) {
        double total = 0.0;
        for (double c : p.atomic_contributions) total += c;
        p.total = total;
    }
    return out;
}

// GP marginal negative log-likelihood of the molecule-level targets.
inline double nll_from_groups(const std::vector<DescriptorGroup>& groups,
                              const std::vector<double>& targets, const KernelParams& kp,
                              const NoiseModel& noise, int workers = 0,
                              double* applied_jitter = nullptr) {
    if (groups.empty()) throw DataError("cannot evaluate likelihood of an empty dataset");
    const Eigen::MatrixXd cov = build_covariance_matrix(groups, kp, noise, workers);
    const auto fac = detail::factorize_with_jitter(cov);
    if (applied_jitter != nullptr) *applied_jitter = fac.jitter;
    const auto m = static_cast<Eigen::Index>(groups.size());
    const Eigen::Map<const Eigen::VectorXd> y(targets.data(), m);
    return detail::solve_weights(cov, fac, y).nll;
}

inline double negative_log_likelihood(const Dataset& d, const std::string& target,
                                      const DescriptorConfig& cfg, const KernelParams& kp,
                                      const NoiseModel& noise, int workers = 0) {
    const auto targets = detail::gather_targets(d, target);
    const auto groups = compute_descriptor_groups(d, cfg, workers);
    return nll_from_groups(groups, targets, kp, noise, workers);
}

} // namespace lcgap
