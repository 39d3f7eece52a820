#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lcgap/lcgap.hpp"

namespace {

using namespace lcgap;

constexpr int exit_config_error = 2;
constexpr int exit_data_error = 3;
constexpr int exit_numeric_error = 4;

struct Flags {
    std::optional<std::string> config_path;
    std::optional<std::string> dataset;
    std::optional<std::string> format;
    std::optional<std::string> target;
    std::optional<std::string> kind;
    std::optional<std::string> output_dir;
    std::optional<double> alpha;
    std::optional<double> r_cut;
    std::optional<int> max_occupancy;
    std::optional<int> occupancy_margin;
    std::optional<double> sigma;
    std::optional<double> length_scale;
    std::optional<double> sigma_n;
    std::optional<int> workers;
    std::optional<int> folds;
    std::optional<std::uint64_t> seed;
    std::optional<int> heavy_bound;
    std::optional<std::vector<double>> grid_alphas;
    std::optional<std::vector<double>> grid_r_cuts;
    std::optional<std::string> grid_protocol;
    std::optional<double> bin_width;
    bool no_nll_opt = false;
    bool optimize_noise = false;
    bool shared_hyperparams = false;
    bool contributions = false;
};

void add_common_options(CLI::App* cmd, Flags& f) {
    cmd->add_option("-c,--config", f.config_path, "JSON config file (flags override it)");
    cmd->add_option("--dataset", f.dataset, "dataset file path");
    cmd->add_option("--format", f.format, "dataset format: extxyz or csv_xyz");
    cmd->add_option("--target", f.target, "target property name");
    cmd->add_option("--kind", f.kind, "descriptor kind: localized, decaying, reduced");
    cmd->add_option("--alpha", f.alpha, "descriptor localization exponent");
    cmd->add_option("--r-cut", f.r_cut, "neighborhood cutoff radius (dataset length units)");
    cmd->add_option("--max-occupancy", f.max_occupancy, "occupancy bound m (0 = auto)");
    cmd->add_option("--occupancy-margin", f.occupancy_margin, "headroom added to auto m");
    cmd->add_option("--sigma", f.sigma, "kernel amplitude init (0 = data-driven)");
    cmd->add_option("--length-scale", f.length_scale, "kernel length scale init (0 = data-driven)");
    cmd->add_option("--sigma-n", f.sigma_n, "observation noise std deviation");
    cmd->add_option("--workers", f.workers, "worker threads (0 = all cores)");
    cmd->add_option("--out", f.output_dir, "output directory");
    cmd->add_flag("--no-nll-opt", f.no_nll_opt, "skip NLL kernel selection, use init as-is");
    cmd->add_flag("--optimize-noise", f.optimize_noise, "include sigma_n in the NLL search");
}

RunConfig resolve_config(const Flags& f) {
    RunConfig cfg = f.config_path ? load_run_config(*f.config_path) : RunConfig{};
    if (f.dataset) cfg.dataset_path = *f.dataset;
    if (f.format) cfg.dataset_format = dataset_format_from_string(*f.format);
    if (f.target) cfg.target = *f.target;
    if (f.kind) cfg.descriptor.kind = descriptor_kind_from_string(*f.kind);
    if (f.alpha) cfg.descriptor.alpha = *f.alpha;
    if (f.r_cut) cfg.descriptor.r_cut = *f.r_cut;
    if (f.max_occupancy) cfg.descriptor.max_occupancy = *f.max_occupancy;
    if (f.occupancy_margin) cfg.occupancy_margin = *f.occupancy_margin;
    if (f.sigma) cfg.kernel.sigma = *f.sigma;
    if (f.length_scale) cfg.kernel.length_scale = *f.length_scale;
    if (f.sigma_n) cfg.noise.sigma_n = *f.sigma_n;
    if (f.output_dir) cfg.output_dir = *f.output_dir;
    if (f.workers) cfg.workers = *f.workers;
    if (f.folds) cfg.folds = *f.folds;
    if (f.seed) cfg.seed = *f.seed;
    if (f.heavy_bound) cfg.heavy_atom_bound = *f.heavy_bound;
    if (f.grid_alphas) cfg.grid.alphas = *f.grid_alphas;
    if (f.grid_r_cuts) cfg.grid.r_cuts = *f.grid_r_cuts;
    if (f.grid_protocol) {
        if (*f.grid_protocol == "cv") {
            cfg.grid_protocol = Protocol::cv;
        } else if (*f.grid_protocol == "transfer") {
            cfg.grid_protocol = Protocol::transfer;
        } else {
            throw ConfigError("--protocol must be cv or transfer, got '" + *f.grid_protocol + "'");
        }
    }
    if (f.bin_width) cfg.contribution_bin_width = *f.bin_width;
    if (f.no_nll_opt) cfg.nll_opt_enabled = false;
    if (f.optimize_noise) cfg.optimize_noise = true;
    if (f.shared_hyperparams) cfg.per_fold_optimization = false;
    if (f.contributions) cfg.export_contributions_flag = true;
    return cfg;
}

Dataset load_dataset(const RunConfig& cfg) {
    if (cfg.dataset_path.empty()) {
        throw ConfigError("no dataset path given (config 'dataset.path' or --dataset)");
    }
    return parse_dataset(cfg.dataset_path, cfg.dataset_format);
}

std::filesystem::path prepare_output_dir(const RunConfig& cfg) {
    std::filesystem::path dir(cfg.output_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
    return dir;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void write_contribution_outputs(const std::vector<ContributionRecord>& records, double bin_width,
                                const std::filesystem::path& dir) {
    write_contributions_csv(records, (dir / "contributions.csv").string());
    const auto summary = summarize_contributions(records, bin_width);
    write_histogram_csv(summary, (dir / "histogram.csv").string());
    write_contribution_summary_json(summary, (dir / "contribution_summary.json").string());
}

int cmd_train(const Flags& flags, const std::optional<std::string>& dump_descriptors,
              const std::optional<std::string>& model_out) {
    const auto start = std::chrono::steady_clock::now();
    const RunConfig cfg = resolve_config(flags);
    const auto dir = prepare_output_dir(cfg);
    const Dataset data = load_dataset(cfg);

    const DescriptorConfig dcfg =
        resolve_occupancy(cfg.descriptor, data, cfg.occupancy_margin, cfg.workers);
    const auto targets = [&] {
        std::vector<double> y;
        y.reserve(data.size());
        for (const auto& mol : data.molecules) {
            if (!mol.has_property(cfg.target)) {
                throw DataError("molecule '" + mol.id + "' is missing target property '" +
                                cfg.target + "'");
            }
            y.push_back(mol.properties.at(cfg.target));
        }
        return y;
    }();
    auto groups = compute_descriptor_groups(data, dcfg, cfg.workers);
    if (dump_descriptors) write_descriptor_dump_csv(data, dcfg, *dump_descriptors);

    KernelParams kp = resolve_kernel_init(cfg.kernel, groups, targets);
    NoiseModel nm = cfg.noise;
    double opt_nll = 0.0;
    if (cfg.nll_opt_enabled) {
        const auto r = optimize_kernel_params(groups, targets, kp, nm, cfg.nll_options());
        kp = r.kernel;
        nm = r.noise;
        opt_nll = r.nll;
    }
    TrainStats stats;
    GapModel model =
        train_from_groups(std::move(groups), targets, dcfg, kp, nm, SolveOptions{cfg.workers}, &stats);
    model.target_name = cfg.target;
    model.length_unit = data.length_unit;
    (void)opt_nll;

    const std::string model_path =
        model_out ? *model_out : (dir / "model.lcgap").string();
    save_model(model, model_path);

    const double wall = seconds_since(start);
    {
        std::ofstream log(dir / "train.log");
        log << "dataset: " << cfg.dataset_path << "\n";
        log << "molecules: " << stats.molecule_count << "\n";
        log << "max_occupancy: " << stats.max_occupancy << "\n";
        log << "kernel sigma: " << format_double17(kp.sigma) << "\n";
        log << "kernel length_scale: " << format_double17(kp.length_scale) << "\n";
        log << "noise sigma_n: " << format_double17(nm.sigma_n) << "\n";
        log << "applied_jitter: " << format_double17(stats.applied_jitter) << "\n";
        log << "nll: " << format_double17(stats.nll) << "\n";
        log << "wall_seconds: " << wall << "\n";
        log << "config: " << run_config_to_json(cfg).dump() << "\n";
    }
    std::cout << "train: M=" << stats.molecule_count << " m=" << stats.max_occupancy
              << " jitter=" << format_double17(stats.applied_jitter)
              << " nll=" << format_double17(stats.nll) << " wall=" << wall << "s model="
              << model_path << "\n";
    return 0;
}

int cmd_predict(const std::string& model_path, const Flags& flags, bool with_contributions) {
    const RunConfig cfg = resolve_config(flags);
    const auto dir = prepare_output_dir(cfg);
    const GapModel model = load_model(model_path);
    const Dataset data = load_dataset(cfg);
    if (model.length_unit != LengthUnit::unspecified &&
        data.length_unit != LengthUnit::unspecified && model.length_unit != data.length_unit) {
        throw DataError("length unit mismatch: model trained on " + to_string(model.length_unit) +
                        " data, dataset is " + to_string(data.length_unit));
    }

    std::vector<Prediction> preds(data.size());
    std::vector<DescriptorGroup> query(data.size());
    parallel_for(data.size(), cfg.workers, [&](std::size_t i) {
        query[i] = compute_descriptor_group(data.molecules[i], model.descriptor_config);
        preds[i] = predict_group(model, query[i], 1);
    });

    bool have_actual = true;
    for (const auto& mol : data.molecules) have_actual = have_actual && mol.has_property(model.target_name);

    const auto csv_path = dir / "predictions.csv";
    {
        std::ofstream out(csv_path);
        if (!out) throw DataError("cannot open output file: " + csv_path.string());
        out << (have_actual ? "id,predicted,actual,abs_error\n" : "id,predicted\n");
        for (std::size_t i = 0; i < data.size(); ++i) {
            out << data.molecules[i].id << "," << format_double17(preds[i].total);
            if (have_actual) {
                const double actual = data.molecules[i].properties.at(model.target_name);
                out << "," << format_double17(actual) << ","
                    << format_double17(std::abs(actual - preds[i].total));
            }
            out << "\n";
        }
    }
    if (with_contributions) {
        std::vector<ContributionRecord> records;
        for (std::size_t i = 0; i < data.size(); ++i) {
            for (std::size_t a = 0; a < preds[i].atomic_contributions.size(); ++a) {
                records.push_back({data.molecules[i].id, static_cast<int>(a),
                                   data.molecules[i].atomic_numbers[a],
                                   preds[i].atomic_contributions[a]});
            }
        }
        write_contribution_outputs(records, cfg.contribution_bin_width, dir);
    }

    std::cout << "predict: N=" << data.size();
    if (have_actual) {
        std::vector<double> actual;
        std::vector<double> predicted;
        for (std::size_t i = 0; i < data.size(); ++i) {
            actual.push_back(data.molecules[i].properties.at(model.target_name));
            predicted.push_back(preds[i].total);
        }
        std::cout << " mae=" << format_double17(mae(actual, predicted));
    }
    std::cout << " predictions=" << csv_path.string() << "\n";
    return 0;
}

int cmd_cv(const Flags& flags) {
    const RunConfig cfg = resolve_config(flags);
    const auto dir = prepare_output_dir(cfg);
    const Dataset data = load_dataset(cfg);
    const auto report = run_cross_validation(data, cfg.target, cfg.descriptor, cfg.kernel,
                                             cfg.noise, cfg.folds, cfg.seed, cfg.eval_options());
    write_report_json(report, (dir / "report.json").string());
    write_per_molecule_csv(report, (dir / "per_molecule.csv").string());
    if (cfg.export_contributions_flag) {
        write_contribution_outputs(report.contributions, cfg.contribution_bin_width, dir);
    }
    std::cout << "cv: folds=" << cfg.folds << " mean_mae=" << format_double17(report.mae_value)
              << " stddev=" << format_double17(report.fold_mae_stddev)
              << " pooled=" << format_double17(report.pooled_mae) << " report="
              << (dir / "report.json").string() << "\n";
    return 0;
}

int cmd_transfer(const Flags& flags) {
    const RunConfig cfg = resolve_config(flags);
    const auto dir = prepare_output_dir(cfg);
    const Dataset data = load_dataset(cfg);
    const auto report = run_transferability(data, cfg.target, cfg.heavy_atom_bound, cfg.descriptor,
                                            cfg.kernel, cfg.noise, cfg.eval_options());
    write_report_json(report, (dir / "report.json").string());
    write_per_molecule_csv(report, (dir / "per_molecule.csv").string());
    if (cfg.export_contributions_flag && !report.degenerate) {
        write_contribution_outputs(report.contributions, cfg.contribution_bin_width, dir);
    }
    if (report.degenerate) {
        std::cerr << "warning: degenerate split at heavy-atom bound " << cfg.heavy_atom_bound
                  << " (train " << report.train_size << ", test " << report.test_size
                  << "); nothing predicted\n";
        std::cout << "transfer: degenerate train=" << report.train_size
                  << " test=" << report.test_size << " report=" << (dir / "report.json").string()
                  << "\n";
        return 0;
    }
    std::cout << "transfer: n=" << cfg.heavy_atom_bound << " train=" << report.train_size
              << " test=" << report.test_size << " mae=" << format_double17(report.mae_value)
              << " report=" << (dir / "report.json").string() << "\n";
    return 0;
}

int cmd_grid(const Flags& flags) {
    const RunConfig cfg = resolve_config(flags);
    const auto dir = prepare_output_dir(cfg);
    const Dataset data = load_dataset(cfg);
    GridSearchArgs args;
    args.kernel_init = cfg.kernel;
    args.noise = cfg.noise;
    args.fold_count = cfg.folds;
    args.seed = cfg.seed;
    args.heavy_atom_bound = cfg.heavy_atom_bound;
    args.occupancy_margin = cfg.occupancy_margin;
    args.nll = cfg.nll_options();
    args.workers = cfg.workers;
    const auto result = grid_search(data, cfg.target, cfg.descriptor.kind, cfg.grid,
                                    cfg.grid_protocol, args);
    write_grid_trace_csv(result, (dir / "grid_trace.csv").string());
    {
        std::ofstream out(dir / "best.json");
        out << grid_result_to_json(result).dump(2) << "\n";
    }
    std::cout << "grid: points=" << result.trace.size() << " best_alpha="
              << format_double17(result.best_alpha) << " best_r_cut="
              << format_double17(result.best_r_cut) << " score=" << format_double17(result.score)
              << " trace=" << (dir / "grid_trace.csv").string() << "\n";
    return 0;
}

int cmd_contrib(const Flags& flags, const std::optional<std::string>& model_path) {
    RunConfig cfg = resolve_config(flags);
    const auto dir = prepare_output_dir(cfg);
    const Dataset data = load_dataset(cfg);
    std::vector<ContributionRecord> records;
    if (model_path) {
        const GapModel model = load_model(*model_path);
        records = export_contributions(model, data, cfg.workers);
    } else {
        cfg.export_contributions_flag = true;
        const auto report = run_cross_validation(data, cfg.target, cfg.descriptor, cfg.kernel,
                                                 cfg.noise, cfg.folds, cfg.seed, cfg.eval_options());
        write_report_json(report, (dir / "report.json").string());
        records = report.contributions;
    }
    write_contribution_outputs(records, cfg.contribution_bin_width, dir);
    std::cout << "contrib: records=" << records.size() << " out=" << dir.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"LC-GAP: localized Coulomb descriptors + sum-kernel Gaussian process potentials"};
    app.require_subcommand(1);

    Flags train_flags;
    std::optional<std::string> dump_descriptors;
    std::optional<std::string> model_out;
    auto* train_cmd = app.add_subcommand("train", "train a potential and write a model file");
    add_common_options(train_cmd, train_flags);
    train_cmd->add_option("--model-out", model_out, "model file path (default <out>/model.lcgap)");
    train_cmd->add_option("--dump-descriptors", dump_descriptors,
                          "also write a descriptor dump CSV to this path");

    Flags predict_flags;
    std::string predict_model;
    bool predict_contribs = false;
    auto* predict_cmd = app.add_subcommand("predict", "predict a dataset with a trained model");
    add_common_options(predict_cmd, predict_flags);
    predict_cmd->add_option("--model", predict_model, "model file")->required();
    predict_cmd->add_flag("--contributions", predict_contribs, "also write per-atom contributions");

    Flags cv_flags;
    auto* cv_cmd = app.add_subcommand("cv", "k-fold cross-validation");
    add_common_options(cv_cmd, cv_flags);
    cv_cmd->add_option("--folds", cv_flags.folds, "fold count k");
    cv_cmd->add_option("--seed", cv_flags.seed, "fold assignment seed");
    cv_cmd->add_flag("--shared-hyperparams", cv_flags.shared_hyperparams,
                     "one kernel selection on the full set instead of per fold (non-canonical)");
    cv_cmd->add_flag("--contributions", cv_flags.contributions, "collect per-atom contributions");

    Flags transfer_flags;
    auto* transfer_cmd =
        app.add_subcommand("transfer", "train on small molecules, predict the larger remainder");
    add_common_options(transfer_cmd, transfer_flags);
    transfer_cmd->add_option("--heavy-bound", transfer_flags.heavy_bound,
                             "train on molecules with at most this many heavy atoms");

    Flags grid_flags;
    auto* grid_cmd = app.add_subcommand("grid", "sweep the (alpha, r_cut) grid");
    add_common_options(grid_cmd, grid_flags);
    grid_cmd->add_option("--alphas", grid_flags.grid_alphas, "grid alpha values")->delimiter(',');
    grid_cmd->add_option("--r-cuts", grid_flags.grid_r_cuts, "grid r_cut values")->delimiter(',');
    grid_cmd->add_option("--protocol", grid_flags.grid_protocol, "scoring protocol: cv or transfer");
    grid_cmd->add_option("--folds", grid_flags.folds, "fold count for the cv protocol");
    grid_cmd->add_option("--seed", grid_flags.seed, "fold assignment seed");
    grid_cmd->add_option("--heavy-bound", grid_flags.heavy_bound,
                         "heavy-atom bound for the transfer protocol");

    Flags contrib_flags;
    std::optional<std::string> contrib_model;
    auto* contrib_cmd = app.add_subcommand(
        "contrib", "export per-atom contributions (from a CV run, or from --model predictions)");
    add_common_options(contrib_cmd, contrib_flags);
    contrib_cmd->add_option("--model", contrib_model, "use a trained model instead of running CV");
    contrib_cmd->add_option("--folds", contrib_flags.folds, "fold count for the CV mode");
    contrib_cmd->add_option("--seed", contrib_flags.seed, "fold assignment seed");
    contrib_cmd->add_option("--bin-width", contrib_flags.bin_width, "histogram bin width");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help and friends
        app.exit(e);
        return exit_config_error;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_flags, dump_descriptors, model_out);
        if (predict_cmd->parsed()) return cmd_predict(predict_model, predict_flags, predict_contribs);
        if (cv_cmd->parsed()) return cmd_cv(cv_flags);
        if (transfer_cmd->parsed()) return cmd_transfer(transfer_flags);
        if (grid_cmd->parsed()) return cmd_grid(grid_flags);
        if (contrib_cmd->parsed()) return cmd_contrib(contrib_flags, contrib_model);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config_error;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return exit_data_error;
    } catch (const NumericError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return exit_numeric_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
