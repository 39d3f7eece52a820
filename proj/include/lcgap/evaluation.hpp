#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lcgap/descriptor.hpp"
#include "lcgap/errors.hpp"
#include "lcgap/gap.hpp"
#include "lcgap/hyperopt.hpp"
#include "lcgap/molecule.hpp"
#include "lcgap/parallel.hpp"

namespace lcgap {

inline double mae(std::span<const double> actual, std::span<const double> predicted) {
    if (actual.size() != predicted.size()) {
        throw std::invalid_argument("mae: length mismatch (" + std::to_string(actual.size()) +
                                    " vs " + std::to_string(predicted.size()) + ")");
    }
    if (actual.empty()) throw std::invalid_argument("mae: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) sum += std::abs(actual[i] - predicted[i]);
    return sum / static_cast<double>(actual.size());
}

enum class Protocol { cv, transfer, single_split };

inline std::string to_string(Protocol p) {
    switch (p) {
    case Protocol::cv: return "cv";
    case Protocol::transfer: return "transfer";
    default: return "single_split";
    }
}

struct PerMoleculeEntry {
    std::string id;
    double actual = 0.0;
    double predicted = 0.0;
    double abs_error = 0.0;
};

struct ContributionRecord {
    std::string molecule_id;
    int atom_index = 0;
    int atomic_number = 0;
    double contribution = 0.0;
};

struct FoldDetail {
    int fold = 0;
    int train_size = 0;
    int test_size = 0;
    KernelParams kernel;
    NoiseModel noise;
    double applied_jitter = 0.0;
    double nll = 0.0;
    double mae_value = 0.0;
};

struct ConfigEcho {
    std::string dataset_source;
    LengthUnit length_unit = LengthUnit::unspecified;
    std::string target_name;
    DescriptorConfig descriptor;
    KernelParams kernel_init;
    NoiseModel noise;
    bool kernel_optimized = true;
    bool per_fold_optimization = true;
    bool noise_optimized = false;
    int fold_count = 0;
    std::uint64_t seed = 0;
    int heavy_atom_bound = 0;
    int workers = 0;
};

struct EvaluationReport {
    Protocol protocol = Protocol::single_split;
    std::string target_name;
    std::vector<PerMoleculeEntry> per_molecule;
    double mae_value = std::numeric_limits<double>::quiet_NaN();
    double pooled_mae = std::numeric_limits<double>::quiet_NaN();
    double fold_mae_stddev = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> per_fold_maes;
    std::vector<FoldDetail> fold_details;
    int train_size = 0;
    int test_size = 0;
    bool degenerate = false;
    ConfigEcho config;
    std::vector<ContributionRecord> contributions;
};

struct EvalOptions {
    bool optimize_kernel = true;      // off: use the given kernel params as-is
    bool per_fold_optimization = true; // off: one shared optimization (non-canonical)
    bool collect_contributions = false;
    int occupancy_margin = 2;
    int workers = 0;
    NllOptOptions nll;
};

// Resolve the auto-occupancy sentinel (max_occupancy <= 0) against a dataset.
inline DescriptorConfig resolve_occupancy(DescriptorConfig cfg, const Dataset& d, int margin,
                                          int workers) {
    if (cfg.max_occupancy <= 0) {
        cfg.max_occupancy = auto_max_occupancy(d, cfg, margin, workers);
    }
    cfg.validate();
    return cfg;
}

namespace detail {

inline double fold_mae_mean(const std::vector<double>& fold_maes) {
    double sum = 0.0;
    for (double v : fold_maes) sum += v;
    return sum / static_cast<double>(fold_maes.size());
}

inline double fold_mae_stddev(const std::vector<double>& fold_maes) {
    if (fold_maes.size() < 2) return 0.0;
    const double mean = fold_mae_mean(fold_maes);
    double ss = 0.0;
    for (double v : fold_maes) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(fold_maes.size() - 1));
}

inline void append_contributions(std::vector<ContributionRecord>& out, const Molecule& mol,
                                 const Prediction& pred) {
    for (std::size_t a = 0; a < pred.atomic_contributions.size(); ++a) {
        out.push_back({mol.id, static_cast<int>(a), mol.atomic_numbers[a],
                       pred.atomic_contributions[a]});
    }
}

// Cross-validation over prebuilt descriptor groups; shared by the single- and
// multi-target protocols. Folds, descriptors, and each fold's covariance
// factorization are reused across targets, because none of them depend on the
// target values.
struct CvEngine {
    const Dataset& dataset;
    const DescriptorConfig& cfg;
    const FoldAssignment& folds;
    const std::vector<DescriptorGroup>& groups;
    KernelParams kernel_init;
    NoiseModel noise;
    EvalOptions opts;

    std::vector<EvaluationReport> run_many(const std::vector<std::string>& targets) const {
        if (targets.empty()) throw ConfigError("cross-validation needs at least one target");
        if (opts.optimize_kernel && targets.size() > 1) {
            throw ConfigError("multi-target cross-validation requires fixed kernel parameters");
        }
        const std::size_t ntargets = targets.size();
        std::vector<std::vector<double>> ys;
        ys.reserve(ntargets);
        for (const auto& t : targets) ys.push_back(gather_targets(dataset, t));
        const KernelParams kernel_init = resolve_kernel_init(this->kernel_init, groups, ys.front());

        std::optional<KernelOptResult> shared;
        if (opts.optimize_kernel && !opts.per_fold_optimization) {
            auto o = opts.nll;
            o.workers = opts.workers;
            shared = optimize_kernel_params(groups, ys.front(), kernel_init, noise, o);
        }

        std::vector<EvaluationReport> reports(ntargets);
        std::vector<std::vector<double>> predicted(ntargets,
                                                   std::vector<double>(dataset.size(), 0.0));
        for (int f = 0; f < folds.fold_count; ++f) {
            std::vector<std::size_t> train_idx;
            std::vector<std::size_t> test_idx;
            for (std::size_t i = 0; i < dataset.size(); ++i) {
                (folds.assignment[i] == f ? test_idx : train_idx).push_back(i);
            }
            std::vector<DescriptorGroup> train_groups;
            train_groups.reserve(train_idx.size());
            for (auto i : train_idx) train_groups.push_back(groups[i]);

            KernelParams kp = kernel_init;
            NoiseModel nm = noise;
            if (shared.has_value()) {
                kp = shared->kernel;
                nm = shared->noise;
            } else if (opts.optimize_kernel) {
                std::vector<double> train_y;
                train_y.reserve(train_idx.size());
                for (auto i : train_idx) train_y.push_back(ys.front()[i]);
                auto o = opts.nll;
                o.workers = opts.workers;
                KernelOptResult r;
                try {
                    r = optimize_kernel_params(train_groups, train_y, kernel_init, noise, o);
                } catch (const NumericError& e) {
                    throw NumericError("fold " + std::to_string(f) + ": " + e.what());
                }
                kp = r.kernel;
                nm = r.noise;
            }

            Eigen::MatrixXd cov;
            lcgap::detail::Factorization fac;
            try {
                cov = build_covariance_matrix(train_groups, kp, nm, opts.workers);
                fac = lcgap::detail::factorize_with_jitter(cov);
            } catch (const NumericError& e) {
                throw NumericError("fold " + std::to_string(f) + ": " + e.what());
            }

            std::vector<Eigen::VectorXd> weights(ntargets);
            std::vector<double> fold_nlls(ntargets, 0.0);
            for (std::size_t p = 0; p < ntargets; ++p) {
                Eigen::VectorXd y_train(static_cast<Eigen::Index>(train_idx.size()));
                for (std::size_t i = 0; i < train_idx.size(); ++i) {
                    y_train(static_cast<Eigen::Index>(i)) = ys[p][train_idx[i]];
                }
                auto solve = lcgap::detail::solve_weights(cov, fac, y_train);
                weights[p] = std::move(solve.weights);
                fold_nlls[p] = solve.nll;
            }

            std::vector<std::vector<Prediction>> preds(test_idx.size());
            parallel_for(test_idx.size(), opts.workers, [&](std::size_t t) {
                preds[t] = predict_group_multi(train_groups, weights, kp, groups[test_idx[t]]);
            });

            for (std::size_t p = 0; p < ntargets; ++p) {
                std::vector<double> fold_actual;
                std::vector<double> fold_pred;
                fold_actual.reserve(test_idx.size());
                fold_pred.reserve(test_idx.size());
                for (std::size_t t = 0; t < test_idx.size(); ++t) {
                    predicted[p][test_idx[t]] = preds[t][p].total;
                    fold_actual.push_back(ys[p][test_idx[t]]);
                    fold_pred.push_back(preds[t][p].total);
                    if (opts.collect_contributions) {
                        append_contributions(reports[p].contributions,
                                             dataset.molecules[test_idx[t]], preds[t][p]);
                    }
                }
                const double fm = mae(fold_actual, fold_pred);
                reports[p].per_fold_maes.push_back(fm);
                reports[p].fold_details.push_back({f, static_cast<int>(train_idx.size()),
                                                   static_cast<int>(test_idx.size()), kp, nm,
                                                   fac.jitter, fold_nlls[p], fm});
            }
        }

        for (std::size_t p = 0; p < ntargets; ++p) {
            auto& report = reports[p];
            report.protocol = Protocol::cv;
            report.target_name = targets[p];
            report.train_size = static_cast<int>(dataset.size());
            report.test_size = static_cast<int>(dataset.size());
            report.per_molecule.reserve(dataset.size());
            std::vector<double> all_actual;
            std::vector<double> all_pred;
            all_actual.reserve(dataset.size());
            all_pred.reserve(dataset.size());
            for (std::size_t i = 0; i < dataset.size(); ++i) {
                const double err = std::abs(ys[p][i] - predicted[p][i]);
                report.per_molecule.push_back(
                    {dataset.molecules[i].id, ys[p][i], predicted[p][i], err});
                all_actual.push_back(ys[p][i]);
                all_pred.push_back(predicted[p][i]);
            }
            report.mae_value = fold_mae_mean(report.per_fold_maes);
            report.pooled_mae = mae(all_actual, all_pred);
            report.fold_mae_stddev = fold_mae_stddev(report.per_fold_maes);

            report.config.dataset_source = dataset.source_name;
            report.config.length_unit = dataset.length_unit;
            report.config.target_name = targets[p];
            report.config.descriptor = cfg;
            report.config.kernel_init = kernel_init;
            report.config.noise = noise;
            report.config.kernel_optimized = opts.optimize_kernel;
            report.config.per_fold_optimization = opts.optimize_kernel && opts.per_fold_optimization;
            report.config.noise_optimized = opts.nll.optimize_noise;
            report.config.fold_count = folds.fold_count;
            report.config.seed = folds.seed;
            report.config.workers = opts.workers;
        }
        return reports;
    }

    EvaluationReport run(const std::string& target) const { return run_many({target}).front(); }
};

} // namespace detail

// k-fold cross-validation: train on k-1 folds, predict the held-out fold,
// with kernel hyperparameters re-selected per fold by NLL descent (the
// canonical protocol; EvalOptions can switch to one shared selection).
inline EvaluationReport run_cross_validation(const Dataset& d, const std::string& target,
                                             const DescriptorConfig& cfg0,
                                             const KernelParams& kernel_init,
                                             const NoiseModel& noise, int k, std::uint64_t seed,
                                             const EvalOptions& opts = {}) {
    const DescriptorConfig cfg = resolve_occupancy(cfg0, d, opts.occupancy_margin, opts.workers);
    const FoldAssignment folds = make_folds(d, k, seed);
    const auto groups = compute_descriptor_groups(d, cfg, opts.workers);
    return detail::CvEngine{d, cfg, folds, groups, kernel_init, noise, opts}.run(target);
}

// Upward transferability: train on the <= n heavy-atom subset, predict the
// complement. max_occupancy auto-resolves on the training split; prediction
// of an atom whose occupancy overflows it is a reported error.
inline EvaluationReport run_transferability(const Dataset& d, const std::string& target, int n,
                                            const DescriptorConfig& cfg0,
                                            const KernelParams& kernel_init,
                                            const NoiseModel& noise, const EvalOptions& opts = {}) {
    const TransferabilitySplit split = transferability_split(d, n);
    EvaluationReport report;
    report.protocol = Protocol::transfer;
    report.target_name = target;
    report.train_size = static_cast<int>(split.train.size());
    report.test_size = static_cast<int>(split.test.size());
    report.config.dataset_source = d.source_name;
    report.config.length_unit = d.length_unit;
    report.config.target_name = target;
    report.config.kernel_init = kernel_init;
    report.config.noise = noise;
    report.config.kernel_optimized = opts.optimize_kernel;
    report.config.per_fold_optimization = false;
    report.config.noise_optimized = opts.nll.optimize_noise;
    report.config.heavy_atom_bound = n;
    report.config.workers = opts.workers;
    report.config.descriptor = cfg0;
    if (split.degenerate) {
        report.degenerate = true;
        return report;
    }

    const DescriptorConfig cfg =
        resolve_occupancy(cfg0, split.train, opts.occupancy_margin, opts.workers);
    report.config.descriptor = cfg;
    const auto train_y = detail::gather_targets(split.train, target);
    auto train_groups = compute_descriptor_groups(split.train, cfg, opts.workers);
    const KernelParams init = resolve_kernel_init(kernel_init, train_groups, train_y);
    report.config.kernel_init = init;

    KernelParams kp = init;
    NoiseModel nm = noise;
    if (opts.optimize_kernel) {
        auto o = opts.nll;
        o.workers = opts.workers;
        const auto r = optimize_kernel_params(train_groups, train_y, init, noise, o);
        kp = r.kernel;
        nm = r.noise;
    }
    TrainStats stats;
    GapModel model = train_from_groups(std::move(train_groups), train_y, cfg, kp, nm,
                                       SolveOptions{opts.workers}, &stats);

    const auto test_y = detail::gather_targets(split.test, target);
    const auto test_groups = compute_descriptor_groups(split.test, cfg, opts.workers);
    std::vector<Prediction> preds(split.test.size());
    parallel_for(split.test.size(), opts.workers, [&](std::size_t i) {
        preds[i] = predict_group(model, test_groups[i], 1);
    });

    std::vector<double> actual;
    std::vector<double> predicted;
    actual.reserve(split.test.size());
    predicted.reserve(split.test.size());
    for (std::size_t i = 0; i < split.test.size(); ++i) {
        const double err = std::abs(test_y[i] - preds[i].total);
        report.per_molecule.push_back({split.test.molecules[i].id, test_y[i], preds[i].total, err});
        actual.push_back(test_y[i]);
        predicted.push_back(preds[i].total);
        if (opts.collect_contributions) {
            detail::append_contributions(report.contributions, split.test.molecules[i], preds[i]);
        }
    }
    report.mae_value = mae(actual, predicted);
    report.pooled_mae = report.mae_value;
    report.fold_details.push_back({0, report.train_size, report.test_size, kp, nm,
                                   stats.applied_jitter, stats.nll, report.mae_value});
    return report;
}

// One CV report per target, all sharing the folds, descriptors, and the given
// kernel parameters (no per-target re-selection).
inline std::vector<EvaluationReport> run_multi_property(const Dataset& d,
                                                        const std::vector<std::string>& targets,
                                                        const DescriptorConfig& cfg0,
                                                        const KernelParams& kernel,
                                                        const NoiseModel& noise, int k,
                                                        std::uint64_t seed,
                                                        const EvalOptions& opts0 = {}) {
    EvalOptions opts = opts0;
    opts.optimize_kernel = false;
    const DescriptorConfig cfg = resolve_occupancy(cfg0, d, opts.occupancy_margin, opts.workers);
    const FoldAssignment folds = make_folds(d, k, seed);
    const auto groups = compute_descriptor_groups(d, cfg, opts.workers);
    return detail::CvEngine{d, cfg, folds, groups, kernel, noise, opts}.run_many(targets);
}

// Per-atom contributions of a model's predictions over a dataset.
inline std::vector<ContributionRecord> export_contributions(const GapModel& model,
                                                            const Dataset& d, int workers = 0) {
    const auto groups = compute_descriptor_groups(d, model.descriptor_config, workers);
    std::vector<Prediction> preds(d.size());
    parallel_for(d.size(), workers, [&](std::size_t i) {
        preds[i] = predict_group(model, groups[i], 1);
    });
    std::vector<ContributionRecord> records;
    for (std::size_t i = 0; i < d.size(); ++i) {
        detail::append_contributions(records, d.molecules[i], preds[i]);
    }
    return records;
}

struct HistogramBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
};

struct ElementStats {
    int atomic_number = 0;
    std::size_t count = 0;
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
};

struct ContributionSummary {
    double bin_width = 2.0;
    std::vector<HistogramBin> overall;
    std::map<int, std::vector<HistogramBin>> per_element;
    std::vector<ElementStats> element_stats;
};

namespace detail {

inline std::vector<HistogramBin> fixed_bin_histogram(const std::vector<double>& values,
                                                     double width) {
    std::vector<HistogramBin> bins;
    if (values.empty()) return bins;
    double lo = values.front();
    double hi = values.front();
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const auto first = static_cast<long>(std::floor(lo / width));
    const auto last = static_cast<long>(std::floor(hi / width));
    bins.resize(static_cast<std::size_t>(last - first + 1));
    for (std::size_t b = 0; b < bins.size(); ++b) {
        bins[b].lo = static_cast<double>(first + static_cast<long>(b)) * width;
        bins[b].hi = bins[b].lo + width;
    }
    for (double v : values) {
        const auto idx = static_cast<std::size_t>(static_cast<long>(std::floor(v / width)) - first);
        ++bins[idx].count;
    }
    return bins;
}

} // namespace detail

// Fixed-bin histograms (overall and per element) plus per-element ranges.
// Bin edges sit at integer multiples of the width.
inline ContributionSummary summarize_contributions(const std::vector<ContributionRecord>& records,
                                                   double bin_width = 2.0) {
    if (!(bin_width > 0)) throw ConfigError("contribution bin width must be > 0");
    ContributionSummary summary;
    summary.bin_width = bin_width;
    std::vector<double> all;
    std::map<int, std::vector<double>> by_element;
    all.reserve(records.size());
    for (const auto& r : records) {
        all.push_back(r.contribution);
        by_element[r.atomic_number].push_back(r.contribution);
    }
    summary.overall = detail::fixed_bin_histogram(all, bin_width);
    for (const auto& [z, values] : by_element) {
        summary.per_element[z] = detail::fixed_bin_histogram(values, bin_width);
        ElementStats stats;
        stats.atomic_number = z;
        stats.count = values.size();
        stats.min = values.front();
        stats.max = values.front();
        double sum = 0.0;
        for (double v : values) {
            stats.min = std::min(stats.min, v);
            stats.max = std::max(stats.max, v);
            sum += v;
        }
        stats.mean = sum / static_cast<double>(values.size());
        summary.element_stats.push_back(stats);
    }
    return summary;
}

} // namespace lcgap
