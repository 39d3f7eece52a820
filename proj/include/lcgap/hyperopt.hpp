#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lcgap/errors.hpp"
#include "lcgap/gap.hpp"
#include "lcgap/kernel.hpp"

namespace lcgap {

// Deterministic shrinking-lattice schedule for the NLL search in
// (log sigma, log length_scale[, log sigma_n]).
struct NllOptOptions {
    int lattice_points = 7;        // per axis
    int rounds = 4;                // total rounds; the span halves each round
    double half_span_decades = 2.0; // round 1 covers x10^-2 .. x10^+2 around init
    bool optimize_noise = false;   // add sigma_n as a third lattice axis
    int workers = 0;
};

struct KernelOptResult {
    KernelParams kernel;
    NoiseModel noise;
    double nll = std::numeric_limits<double>::infinity();
    int evaluations = 0; // successful NLL evaluations
    int failures = 0;    // lattice points whose factorization failed
};

// Derivative-free descent: evaluate the NLL on a log-spaced lattice centered
// on the current best point, shrink the span by half, repeat. The returned
// NLL is the minimum over every point evaluated, so it can never exceed the
// NLL at any first-round lattice point (the init included).
inline KernelOptResult optimize_kernel_params(const std::vector<DescriptorGroup>& groups,
                                              const std::vector<double>& targets,
                                              const KernelParams& init, const NoiseModel& noise,
                                              const NllOptOptions& opts = {}) {
    init.validate();
    noise.validate();
    if (opts.lattice_points < 2) throw ConfigError("NLL lattice needs >= 2 points per axis");
    if (opts.rounds < 1) throw ConfigError("NLL optimization needs >= 1 round");
    const bool opt_noise = opts.optimize_noise && noise.sigma_n > 0;

    KernelOptResult best;
    best.kernel = init;
    best.noise = noise;

    double center_sigma = std::log10(init.sigma);
    double center_length = std::log10(init.length_scale);
    double center_noise = opt_noise ? std::log10(noise.sigma_n) : 0.0;

    const int n = opts.lattice_points;
    for (int round = 0; round < opts.rounds; ++round) {
        const double half = opts.half_span_decades / std::pow(2.0, round);
        std::vector<double> offsets(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            offsets[static_cast<std::size_t>(i)] = -half + 2.0 * half * i / (n - 1);
        }
        const std::vector<double> noise_offsets =
            opt_noise ? offsets : std::vector<double>{0.0};
        for (double ds : offsets) {
            for (double dl : offsets) {
                for (double dn : noise_offsets) {
                    KernelParams kp{std::pow(10.0, center_sigma + ds),
                                    std::pow(10.0, center_length + dl)};
                    NoiseModel nm = noise;
                    if (opt_noise) nm.sigma_n = std::pow(10.0, center_noise + dn);
                    double nll = 0.0;
                    try {
                        nll = nll_from_groups(groups, targets, kp, nm, opts.workers);
                    } catch (const NumericError&) {
                        ++best.failures;
                        continue;
                    }
                    ++best.evaluations;
                    if (std::isfinite(nll) && nll < best.nll) {
                        best.nll = nll;
                        best.kernel = kp;
                        best.noise = nm;
                    }
                }
            }
        }
        center_sigma = std::log10(best.kernel.sigma);
        center_length = std::log10(best.kernel.length_scale);
        if (opt_noise) center_noise = std::log10(best.noise.sigma_n);
    }
    if (best.evaluations == 0) {
        throw NumericError("kernel optimization failed: every lattice point's factorization failed");
    }
    return best;
}

inline KernelOptResult optimize_kernel_params(const Dataset& d, const std::string& target,
                                              const DescriptorConfig& cfg,
                                              const KernelParams& init, const NoiseModel& noise,
                                              const NllOptOptions& opts = {}) {
    const auto targets = detail::gather_targets(d, target);
    const auto groups = compute_descriptor_groups(d, cfg, opts.workers);
    return optimize_kernel_params(groups, targets, init, noise, opts);
}

// Data-driven starting point: sigma from the target spread, length_scale
// from the typical descriptor L1 separation (the kernel divides by l^2).
inline KernelParams default_kernel_init(const std::vector<DescriptorGroup>& groups,
                                        const std::vector<double>& targets) {
    double mean = 0.0;
    for (double t : targets) mean += t;
    mean /= targets.empty() ? 1.0 : static_cast<double>(targets.size());
    double var = 0.0;
    for (double t : targets) var += (t - mean) * (t - mean);
    var /= targets.empty() ? 1.0 : static_cast<double>(targets.size());
    double sigma = std::sqrt(var);
    if (!(sigma > 0)) sigma = 1.0;

    // median L1 distance over a deterministic subsample of atom pairs
    std::vector<std::span<const double>> atoms;
    for (const auto& g : groups) {
        for (int i = 0; i < g.atom_count; ++i) atoms.push_back(g.atom(i));
    }
    std::vector<double> dists;
    if (atoms.size() >= 2) {
        const std::size_t stride = std::max<std::size_t>(1, atoms.size() / 64);
        for (std::size_t i = 0; i < atoms.size(); i += stride) {
            for (std::size_t j = i + stride; j < atoms.size(); j += stride) {
                double l1 = 0.0;
                for (std::size_t c = 0; c < atoms[i].size(); ++c) {
                    l1 += std::abs(atoms[i][c] - atoms[j][c]);
                }
                dists.push_back(l1);
            }
        }
    }
    double length_scale = 1.0;
    if (!dists.empty()) {
        std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2),
                         dists.end());
        const double median = dists[dists.size() / 2];
        if (median > 0) length_scale = std::sqrt(median);
    }
    return KernelParams{sigma, length_scale};
}

// Fill in the auto-init sentinel (sigma or length_scale <= 0) with the
// data-driven starting point.
inline KernelParams resolve_kernel_init(KernelParams init,
                                        const std::vector<DescriptorGroup>& groups,
                                        const std::vector<double>& targets) {
    if (init.sigma > 0 && init.length_scale > 0) return init;
    const KernelParams auto_init = default_kernel_init(groups, targets);
    if (init.sigma <= 0) init.sigma = auto_init.sigma;
    if (init.length_scale <= 0) init.length_scale = auto_init.length_scale;
    return init;
}

// (alpha, r_cut) grid; the footnote grid of the reference experiments is the
// conventional default, set at the configuration layer.
struct HyperGrid {
    std::vector<double> alphas;
    std::vector<double> r_cuts;

    void validate() const {
        auto check = [](const std::vector<double>& axis, const char* name) {
            if (axis.empty()) throw ConfigError(std::string("hyper grid axis '") + name + "' is empty");
            for (std::size_t i = 0; i + 1 < axis.size(); ++i) {
                if (!(axis[i] < axis[i + 1])) {
                    throw ConfigError(std::string("hyper grid axis '") + name +
                                      "' must be strictly increasing");
                }
            }
            for (double v : axis) {
                if (!(v > 0)) throw ConfigError(std::string("hyper grid axis '") + name +
                                                "' must be positive");
            }
        };
        check(alphas, "alphas");
        check(r_cuts, "r_cuts");
    }
};

struct GridPoint {
    double alpha = 0.0;
    double r_cut = 0.0;
    KernelParams kernel;
    NoiseModel noise;
    double score = std::numeric_limits<double>::quiet_NaN();
    bool ok = false;
    std::string error;
};

struct HyperResult {
    double best_alpha = 0.0;
    double best_r_cut = 0.0;
    KernelParams best_kernel;
    NoiseModel best_noise;
    double score = std::numeric_limits<double>::infinity();
    std::vector<GridPoint> trace;
};

} // namespace lcgap
