#pragma once

#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcgap/dataset_io.hpp"
#include "lcgap/elements.hpp"
#include "lcgap/errors.hpp"
#include "lcgap/evaluation.hpp"
#include "lcgap/format.hpp"
#include "lcgap/grid_search.hpp"

namespace lcgap {

namespace detail {

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open output file: " + path);
    return out;
}

// Render doubles as 17-significant-digit strings so every emitted value
// round-trips exactly, in JSON as well as CSV.
inline nlohmann::ordered_json json_num(double v) { return format_double17(v); }

} // namespace detail

inline nlohmann::ordered_json config_echo_to_json(const ConfigEcho& c) {
    nlohmann::ordered_json j;
    j["dataset_source"] = c.dataset_source;
    j["length_unit"] = to_string(c.length_unit);
    j["target"] = c.target_name;
    j["descriptor"] = {{"kind", to_string(c.descriptor.kind)},
                       {"alpha", detail::json_num(c.descriptor.alpha)},
                       {"r_cut", detail::json_num(c.descriptor.r_cut)},
                       {"max_occupancy", c.descriptor.max_occupancy}};
    j["kernel_init"] = {{"sigma", detail::json_num(c.kernel_init.sigma)},
                        {"length_scale", detail::json_num(c.kernel_init.length_scale)}};
    j["noise"] = {{"sigma_n", detail::json_num(c.noise.sigma_n)}};
    j["kernel_optimized"] = c.kernel_optimized;
    j["per_fold_optimization"] = c.per_fold_optimization;
    j["noise_optimized"] = c.noise_optimized;
    j["fold_count"] = c.fold_count;
    j["seed"] = c.seed;
    j["heavy_atom_bound"] = c.heavy_atom_bound;
    j["workers"] = c.workers;
    return j;
}

inline nlohmann::ordered_json report_to_json(const EvaluationReport& r) {
    nlohmann::ordered_json j;
    j["protocol"] = to_string(r.protocol);
    j["target"] = r.target_name;
    j["degenerate"] = r.degenerate;
    j["train_size"] = r.train_size;
    j["test_size"] = r.test_size;
    j["mae"] = r.degenerate ? nlohmann::ordered_json(nullptr) : detail::json_num(r.mae_value);
    if (r.protocol == Protocol::cv) {
        j["pooled_mae"] = detail::json_num(r.pooled_mae);
        j["fold_mae_stddev"] = detail::json_num(r.fold_mae_stddev);
        auto folds = nlohmann::ordered_json::array();
        for (double v : r.per_fold_maes) folds.push_back(detail::json_num(v));
        j["per_fold_maes"] = std::move(folds);
    }
    auto details = nlohmann::ordered_json::array();
    for (const auto& f : r.fold_details) {
        details.push_back({{"fold", f.fold},
                           {"train_size", f.train_size},
                           {"test_size", f.test_size},
                           {"sigma", detail::json_num(f.kernel.sigma)},
                           {"length_scale", detail::json_num(f.kernel.length_scale)},
                           {"sigma_n", detail::json_num(f.noise.sigma_n)},
                           {"applied_jitter", detail::json_num(f.applied_jitter)},
                           {"nll", detail::json_num(f.nll)},
                           {"mae", detail::json_num(f.mae_value)}});
    }
    j["fold_details"] = std::move(details);
    j["config"] = config_echo_to_json(r.config);
    auto rows = nlohmann::ordered_json::array();
    for (const auto& e : r.per_molecule) {
        rows.push_back({{"id", e.id},
                        {"actual", detail::json_num(e.actual)},
                        {"predicted", detail::json_num(e.predicted)},
                        {"abs_error", detail::json_num(e.abs_error)}});
    }
    j["per_molecule"] = std::move(rows);
    return j;
}

inline void write_report_json(const EvaluationReport& r, const std::string& path) {
    auto out = detail::open_output(path);
    out << report_to_json(r).dump(2) << "\n";
}

inline void write_per_molecule_csv(const EvaluationReport& r, std::ostream& out) {
    out << "id,actual,predicted,abs_error\n";
    for (const auto& e : r.per_molecule) {
        out << e.id << "," << format_double17(e.actual) << "," << format_double17(e.predicted)
            << "," << format_double17(e.abs_error) << "\n";
    }
}

inline void write_per_molecule_csv(const EvaluationReport& r, const std::string& path) {
    auto out = detail::open_output(path);
    write_per_molecule_csv(r, out);
}

inline void write_contributions_csv(const std::vector<ContributionRecord>& records,
                                    std::ostream& out) {
    out << "molecule_id,atom_index,element,contribution\n";
    for (const auto& rec : records) {
        out << rec.molecule_id << "," << rec.atom_index << ","
            << element_symbol(rec.atomic_number) << "," << format_double17(rec.contribution)
            << "\n";
    }
}

inline void write_contributions_csv(const std::vector<ContributionRecord>& records,
                                    const std::string& path) {
    auto out = detail::open_output(path);
    write_contributions_csv(records, out);
}

inline nlohmann::ordered_json contribution_summary_to_json(const ContributionSummary& s) {
    auto bins_json = [](const std::vector<HistogramBin>& bins) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& b : bins) {
            arr.push_back({{"lo", detail::json_num(b.lo)},
                           {"hi", detail::json_num(b.hi)},
                           {"count", b.count}});
        }
        return arr;
    };
    nlohmann::ordered_json j;
    j["bin_width"] = detail::json_num(s.bin_width);
    j["overall"] = bins_json(s.overall);
    auto per_element = nlohmann::ordered_json::object();
    for (const auto& [z, bins] : s.per_element) per_element[element_symbol(z)] = bins_json(bins);
    j["per_element"] = std::move(per_element);
    auto stats = nlohmann::ordered_json::array();
    for (const auto& e : s.element_stats) {
        stats.push_back({{"element", element_symbol(e.atomic_number)},
                         {"count", e.count},
                         {"min", detail::json_num(e.min)},
                         {"max", detail::json_num(e.max)},
                         {"mean", detail::json_num(e.mean)}});
    }
    j["element_stats"] = std::move(stats);
    return j;
}

inline void write_contribution_summary_json(const ContributionSummary& s,
                                            const std::string& path) {
    auto out = detail::open_output(path);
    out << contribution_summary_to_json(s).dump(2) << "\n";
}

inline void write_histogram_csv(const ContributionSummary& s, std::ostream& out) {
    out << "element,bin_lo,bin_hi,count\n";
    for (const auto& b : s.overall) {
        out << "all," << format_double17(b.lo) << "," << format_double17(b.hi) << "," << b.count
            << "\n";
    }
    for (const auto& [z, bins] : s.per_element) {
        for (const auto& b : bins) {
            out << element_symbol(z) << "," << format_double17(b.lo) << ","
                << format_double17(b.hi) << "," << b.count << "\n";
        }
    }
}

inline void write_histogram_csv(const ContributionSummary& s, const std::string& path) {
    auto out = detail::open_output(path);
    write_histogram_csv(s, out);
}

inline void write_grid_trace_csv(const HyperResult& r, std::ostream& out) {
    out << "alpha,r_cut,sigma,length_scale,noise,score,status\n";
    for (const auto& p : r.trace) {
        out << format_double17(p.alpha) << "," << format_double17(p.r_cut) << ",";
        if (p.ok) {
            out << format_double17(p.kernel.sigma) << "," << format_double17(p.kernel.length_scale)
                << "," << format_double17(p.noise.sigma_n) << "," << format_double17(p.score)
                << ",ok\n";
        } else {
            out << ",,,,failed\n";
        }
    }
}

inline void write_grid_trace_csv(const HyperResult& r, const std::string& path) {
    auto out = detail::open_output(path);
    write_grid_trace_csv(r, out);
}

inline nlohmann::ordered_json grid_result_to_json(const HyperResult& r) {
    nlohmann::ordered_json j;
    j["best_alpha"] = detail::json_num(r.best_alpha);
    j["best_r_cut"] = detail::json_num(r.best_r_cut);
    j["best_sigma"] = detail::json_num(r.best_kernel.sigma);
    j["best_length_scale"] = detail::json_num(r.best_kernel.length_scale);
    j["best_sigma_n"] = detail::json_num(r.best_noise.sigma_n);
    j["score"] = detail::json_num(r.score);
    j["points"] = r.trace.size();
    return j;
}

// Debug dump: one row per (molecule, atom) with the full descriptor vector.
inline void write_descriptor_dump_csv(const Dataset& d, const DescriptorConfig& cfg,
                                      std::ostream& out) {
    cfg.validate();
    const auto dim = descriptor_length(cfg.kind, cfg.max_occupancy);
    out << "molecule_id,atom_index,kind,alpha,r_cut,m";
    for (std::size_t c = 0; c < dim; ++c) out << ",v_" << c;
    out << "\n";
    for (const auto& mol : d.molecules) {
        for (std::size_t i = 0; i < mol.size(); ++i) {
            const auto desc = compute_descriptor(mol, static_cast<int>(i), cfg);
            out << mol.id << "," << i << "," << to_string(cfg.kind) << ","
                << format_double17(cfg.alpha) << "," << format_double17(cfg.r_cut) << ","
                << cfg.max_occupancy;
            for (double v : desc.values) out << "," << format_double17(v);
            out << "\n";
        }
    }
}

inline void write_descriptor_dump_csv(const Dataset& d, const DescriptorConfig& cfg,
                                      const std::string& path) {
    auto out = detail::open_output(path);
    write_descriptor_dump_csv(d, cfg, out);
}

} // namespace lcgap
