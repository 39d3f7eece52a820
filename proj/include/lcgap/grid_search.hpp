#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lcgap/errors.hpp"
#include "lcgap/evaluation.hpp"
#include "lcgap/hyperopt.hpp"

namespace lcgap {

struct GridSearchArgs {
    KernelParams kernel_init;
    NoiseModel noise;
    int fold_count = 5;          // cv protocol
    std::uint64_t seed = 0;      // cv protocol
    int heavy_atom_bound = 5;    // transfer protocol
    int occupancy_margin = 2;
    NllOptOptions nll;
    int workers = 0;
};

// Sweep (alpha, r_cut): at each point, resolve m, select kernel params by NLL
// descent on the protocol's training set, then score with the protocol's MAE
// (mean fold MAE for cv, test MAE for transfer). Points are visited in
// alpha-major order and the first minimum wins ties. Failed points stay in
// the trace and are skipped; only a fully failed grid is an error.
inline HyperResult grid_search(const Dataset& d, const std::string& target, DescriptorKind kind,
                               const HyperGrid& grid, Protocol protocol,
                               const GridSearchArgs& args) {
    grid.validate();
    if (protocol != Protocol::cv && protocol != Protocol::transfer) {
        throw ConfigError("grid_search protocol must be cv or transfer");
    }
    HyperResult result;
    result.trace.reserve(grid.alphas.size() * grid.r_cuts.size());
    for (double alpha : grid.alphas) {
        for (double r_cut : grid.r_cuts) {
            GridPoint point;
            point.alpha = alpha;
            point.r_cut = r_cut;
            try {
                DescriptorConfig cfg;
                cfg.kind = kind;
                cfg.alpha = alpha;
                cfg.r_cut = r_cut;
                cfg.max_occupancy = 0; // resolved below on the protocol's training set

                EvalOptions eval_opts;
                eval_opts.optimize_kernel = false; // kernel chosen once per grid point
                eval_opts.occupancy_margin = args.occupancy_margin;
                eval_opts.workers = args.workers;
                eval_opts.nll = args.nll;

                if (protocol == Protocol::cv) {
                    cfg = resolve_occupancy(cfg, d, args.occupancy_margin, args.workers);
                    const auto o = [&] {
                        auto n = args.nll;
                        n.workers = args.workers;
                        return n;
                    }();
                    // descriptors depend only on cfg, so one set serves both the
                    // kernel selection and the fold runs
                    const auto groups = compute_descriptor_groups(d, cfg, args.workers);
                    const auto targets_y = detail::gather_targets(d, target);
                    const auto init = resolve_kernel_init(args.kernel_init, groups, targets_y);
                    const auto opt = optimize_kernel_params(groups, targets_y, init, args.noise, o);
                    point.kernel = opt.kernel;
                    point.noise = opt.noise;
                    const auto folds = make_folds(d, args.fold_count, args.seed);
                    const auto report = detail::CvEngine{d, cfg, folds, groups, opt.kernel,
                                                         opt.noise, eval_opts}
                                            .run(target);
                    point.score = report.mae_value;
                } else {
                    const auto split = transferability_split(d, args.heavy_atom_bound);
                    if (split.degenerate) {
                        throw DataError("degenerate transferability split at heavy-atom bound " +
                                        std::to_string(args.heavy_atom_bound));
                    }
                    cfg = resolve_occupancy(cfg, split.train, args.occupancy_margin, args.workers);
                    const auto o = [&] {
                        auto n = args.nll;
                        n.workers = args.workers;
                        return n;
                    }();
                    const auto train_y = detail::gather_targets(split.train, target);
                    const auto train_groups = compute_descriptor_groups(split.train, cfg, args.workers);
                    const auto init = resolve_kernel_init(args.kernel_init, train_groups, train_y);
                    const auto opt = optimize_kernel_params(train_groups, train_y, init, args.noise, o);
                    point.kernel = opt.kernel;
                    point.noise = opt.noise;
                    const auto report = run_transferability(d, target, args.heavy_atom_bound, cfg,
                                                            opt.kernel, opt.noise, eval_opts);
                    point.score = report.mae_value;
                }
                point.ok = true;
            } catch (const std::exception& e) {
                point.ok = false;
                point.error = e.what();
            }
            if (point.ok && point.score < result.score) {
                result.score = point.score;
                result.best_alpha = alpha;
                result.best_r_cut = r_cut;
                result.best_kernel = point.kernel;
                result.best_noise = point.noise;
            }
            result.trace.push_back(std::move(point));
        }
    }
    bool any_ok = false;
    for (const auto& p : result.trace) any_ok = any_ok || p.ok;
    if (!any_ok) throw NumericError("grid search failed: every grid point failed");
    return result;
}

} // namespace lcgap
