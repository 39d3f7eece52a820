#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcgap/dataset_io.hpp"
#include "lcgap/descriptor.hpp"
#include "lcgap/errors.hpp"
#include "lcgap/evaluation.hpp"
#include "lcgap/format.hpp"
#include "lcgap/hyperopt.hpp"
#include "lcgap/kernel.hpp"

namespace lcgap {

// Fully-resolved run configuration. Every field has a default; a config file
// overrides defaults and CLI flags override the file. kernel sigma or
// length_scale of 0 means "choose a data-driven starting point".
struct RunConfig {
    std::string dataset_path;
    DatasetFormat dataset_format = DatasetFormat::extxyz;
    std::string target = "atomization_energy";

    DescriptorConfig descriptor{DescriptorKind::reduced, 5.0, 6.5, 0}; // m 0 = auto
    int occupancy_margin = 2;

    KernelParams kernel{0.0, 0.0}; // 0 = auto init
    NoiseModel noise{0.1};
    bool optimize_noise = false;

    bool nll_opt_enabled = true;
    int nll_lattice_points = 7;
    int nll_rounds = 4;
    double nll_half_span_decades = 2.0;

    int folds = 5;
    std::uint64_t seed = 42;
    int heavy_atom_bound = 5;
    bool per_fold_optimization = true;

    HyperGrid grid{{3.0, 4.0, 5.0, 6.0, 7.0},
                   {3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0, 6.5, 7.0}};
    Protocol grid_protocol = Protocol::cv;

    bool export_contributions_flag = false;
    double contribution_bin_width = 2.0;

    std::string output_dir = "out";
    int workers = 0; // 0 = all available

    NllOptOptions nll_options() const {
        NllOptOptions o;
        o.lattice_points = nll_lattice_points;
        o.rounds = nll_rounds;
        o.half_span_decades = nll_half_span_decades;
        o.optimize_noise = optimize_noise;
        o.workers = workers;
        return o;
    }

    EvalOptions eval_options() const {
        EvalOptions o;
        o.optimize_kernel = nll_opt_enabled;
        o.per_fold_optimization = per_fold_optimization;
        o.collect_contributions = export_contributions_flag;
        o.occupancy_margin = occupancy_margin;
        o.workers = workers;
        o.nll = nll_options();
        return o;
    }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const std::string& section,
                                std::initializer_list<const char*> known) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) {
            throw ConfigError("unknown config key '" + (section.empty() ? key : section + "." + key) +
                              "'");
        }
    }
}

template <typename T>
inline void read_field(const nlohmann::json& obj, const char* key, T& out,
                       const std::string& section) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config field '" + section + "." + key + "' has the wrong type");
    }
}

} // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    detail::reject_unknown_keys(j, "",
                                {"dataset", "target", "descriptor", "kernel", "noise", "nll_opt",
                                 "protocol", "grid", "contributions", "output_dir", "workers"});
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        detail::reject_unknown_keys(d, "dataset", {"path", "format"});
        detail::read_field(d, "path", cfg.dataset_path, "dataset");
        std::string fmt;
        detail::read_field(d, "format", fmt, "dataset");
        if (!fmt.empty()) cfg.dataset_format = dataset_format_from_string(fmt);
    }
    detail::read_field(j, "target", cfg.target, "");
    if (j.contains("descriptor")) {
        const auto& d = j.at("descriptor");
        detail::reject_unknown_keys(d, "descriptor",
                                    {"kind", "alpha", "r_cut", "max_occupancy", "occupancy_margin"});
        std::string kind;
        detail::read_field(d, "kind", kind, "descriptor");
        if (!kind.empty()) cfg.descriptor.kind = descriptor_kind_from_string(kind);
        detail::read_field(d, "alpha", cfg.descriptor.alpha, "descriptor");
        detail::read_field(d, "r_cut", cfg.descriptor.r_cut, "descriptor");
        detail::read_field(d, "max_occupancy", cfg.descriptor.max_occupancy, "descriptor");
        detail::read_field(d, "occupancy_margin", cfg.occupancy_margin, "descriptor");
    }
    if (j.contains("kernel")) {
        const auto& k = j.at("kernel");
        detail::reject_unknown_keys(k, "kernel", {"sigma", "length_scale"});
        detail::read_field(k, "sigma", cfg.kernel.sigma, "kernel");
        detail::read_field(k, "length_scale", cfg.kernel.length_scale, "kernel");
    }
    if (j.contains("noise")) {
        const auto& n = j.at("noise");
        detail::reject_unknown_keys(n, "noise", {"sigma_n", "optimize"});
        detail::read_field(n, "sigma_n", cfg.noise.sigma_n, "noise");
        detail::read_field(n, "optimize", cfg.optimize_noise, "noise");
    }
    if (j.contains("nll_opt")) {
        const auto& n = j.at("nll_opt");
        detail::reject_unknown_keys(n, "nll_opt",
                                    {"enabled", "lattice_points", "rounds", "half_span_decades"});
        detail::read_field(n, "enabled", cfg.nll_opt_enabled, "nll_opt");
        detail::read_field(n, "lattice_points", cfg.nll_lattice_points, "nll_opt");
        detail::read_field(n, "rounds", cfg.nll_rounds, "nll_opt");
        detail::read_field(n, "half_span_decades", cfg.nll_half_span_decades, "nll_opt");
    }
    if (j.contains("protocol")) {
        const auto& p = j.at("protocol");
        detail::reject_unknown_keys(p, "protocol",
                                    {"folds", "seed", "heavy_atom_bound", "per_fold_optimization"});
        detail::read_field(p, "folds", cfg.folds, "protocol");
        detail::read_field(p, "seed", cfg.seed, "protocol");
        detail::read_field(p, "heavy_atom_bound", cfg.heavy_atom_bound, "protocol");
        detail::read_field(p, "per_fold_optimization", cfg.per_fold_optimization, "protocol");
    }
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        detail::reject_unknown_keys(g, "grid", {"alphas", "r_cuts", "protocol"});
        detail::read_field(g, "alphas", cfg.grid.alphas, "grid");
        detail::read_field(g, "r_cuts", cfg.grid.r_cuts, "grid");
        std::string proto;
        detail::read_field(g, "protocol", proto, "grid");
        if (!proto.empty()) {
            if (proto == "cv") {
                cfg.grid_protocol = Protocol::cv;
            } else if (proto == "transfer") {
                cfg.grid_protocol = Protocol::transfer;
            } else {
                throw ConfigError("config field 'grid.protocol' must be cv or transfer, got '" +
                                  proto + "'");
            }
        }
    }
    if (j.contains("contributions")) {
        const auto& c = j.at("contributions");
        detail::reject_unknown_keys(c, "contributions", {"export", "bin_width"});
        detail::read_field(c, "export", cfg.export_contributions_flag, "contributions");
        detail::read_field(c, "bin_width", cfg.contribution_bin_width, "contributions");
    }
    detail::read_field(j, "output_dir", cfg.output_dir, "");
    detail::read_field(j, "workers", cfg.workers, "");
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path + ": " + e.what());
    }
    return run_config_from_json(j);
}

// The resolved configuration as echoed into logs and summaries.
inline nlohmann::ordered_json run_config_to_json(const RunConfig& cfg) {
    nlohmann::ordered_json j;
    j["dataset"] = {{"path", cfg.dataset_path},
                    {"format", cfg.dataset_format == DatasetFormat::extxyz ? "extxyz" : "csv_xyz"}};
    j["target"] = cfg.target;
    j["descriptor"] = {{"kind", to_string(cfg.descriptor.kind)},
                       {"alpha", format_double17(cfg.descriptor.alpha)},
                       {"r_cut", format_double17(cfg.descriptor.r_cut)},
                       {"max_occupancy", cfg.descriptor.max_occupancy},
                       {"occupancy_margin", cfg.occupancy_margin}};
    j["kernel"] = {{"sigma", format_double17(cfg.kernel.sigma)},
                   {"length_scale", format_double17(cfg.kernel.length_scale)}};
    j["noise"] = {{"sigma_n", format_double17(cfg.noise.sigma_n)}, {"optimize", cfg.optimize_noise}};
    j["nll_opt"] = {{"enabled", cfg.nll_opt_enabled},
                    {"lattice_points", cfg.nll_lattice_points},
                    {"rounds", cfg.nll_rounds},
                    {"half_span_decades", format_double17(cfg.nll_half_span_decades)}};
    j["protocol"] = {{"folds", cfg.folds},
                     {"seed", cfg.seed},
                     {"heavy_atom_bound", cfg.heavy_atom_bound},
                     {"per_fold_optimization", cfg.per_fold_optimization}};
    auto alphas = nlohmann::ordered_json::array();
    for (double a : cfg.grid.alphas) alphas.push_back(format_double17(a));
    auto rcuts = nlohmann::ordered_json::array();
    for (double r : cfg.grid.r_cuts) rcuts.push_back(format_double17(r));
    j["grid"] = {{"alphas", std::move(alphas)},
                 {"r_cuts", std::move(rcuts)},
                 {"protocol", cfg.grid_protocol == Protocol::cv ? "cv" : "transfer"}};
    j["contributions"] = {{"export", cfg.export_contributions_flag},
                          {"bin_width", format_double17(cfg.contribution_bin_width)}};
    j["output_dir"] = cfg.output_dir;
    j["workers"] = cfg.workers;
    return j;
}

} // namespace lcgap
