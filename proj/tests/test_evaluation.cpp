#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>

#include "test_support.hpp"

using namespace lcgap;
using Catch::Approx;

namespace {

DescriptorConfig synth_cfg(int m = 0) {
    DescriptorConfig cfg;
    cfg.kind = DescriptorKind::reduced;
    cfg.alpha = 3.0;
    cfg.r_cut = 4.0;
    cfg.max_occupancy = m; // 0 = auto
    return cfg;
}

EvalOptions fast_eval(bool contributions = false) {
    EvalOptions o;
    o.collect_contributions = contributions;
    o.workers = 1;
    o.nll.lattice_points = 5;
    o.nll.rounds = 2;
    return o;
}

} // namespace

TEST_CASE("mae: definition and contract errors", "[eval]") {
    const std::vector<double> a{1.0, 2.0, 3.0};
    CHECK(mae(a, a) == 0.0);
    CHECK(mae(std::vector<double>{0.0, 2.0}, std::vector<double>{1.0, 1.0}) == 1.0);
    CHECK(mae(std::vector<double>{-4.5}, std::vector<double>{3.25}) == 7.75);
    CHECK_THROWS_AS(mae(a, std::vector<double>{1.0}), std::invalid_argument);
    CHECK_THROWS_AS(mae(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("cross-validation: constant single-atom dataset predicts near-exactly", "[eval]") {
    Dataset d;
    d.source_name = "const";
    for (int i = 0; i < 5; ++i) {
        Molecule m;
        m.id = "a" + std::to_string(i);
        m.atomic_numbers = {8};
        m.coordinates = {{static_cast<double>(i), 0, 0}};
        m.properties["energy"] = 1.0;
        d.molecules.push_back(std::move(m));
    }
    auto opts = fast_eval();
    opts.optimize_kernel = false;
    const auto report = run_cross_validation(d, "energy", synth_cfg(), KernelParams{1.0, 1.0},
                                             NoiseModel{0.01}, 5, 1, opts);
    CHECK(report.mae_value <= 0.01);
    CHECK(report.per_fold_maes.size() == 5);
}

TEST_CASE("cross-validation: every molecule predicted exactly once", "[eval]") {
    const auto d = testutil::random_dataset(103, 14);
    const auto report = run_cross_validation(d, "energy", synth_cfg(), KernelParams{0, 0},
                                             NoiseModel{0.1}, 4, 9, fast_eval());
    REQUIRE(report.per_molecule.size() == d.size());
    std::set<std::string> ids;
    for (const auto& e : report.per_molecule) ids.insert(e.id);
    CHECK(ids.size() == d.size());
    // union of fold test sizes covers the dataset with no duplicates
    int total_test = 0;
    for (const auto& f : report.fold_details) total_test += f.test_size;
    CHECK(total_test == static_cast<int>(d.size()));
}

TEST_CASE("cross-validation: reports are reproducible bit-for-bit", "[eval]") {
    const auto d = testutil::random_dataset(107, 12);
    const auto a = run_cross_validation(d, "energy", synth_cfg(), KernelParams{0, 0},
                                        NoiseModel{0.1}, 3, 5, fast_eval(true));
    const auto b = run_cross_validation(d, "energy", synth_cfg(), KernelParams{0, 0},
                                        NoiseModel{0.1}, 3, 5, fast_eval(true));
    REQUIRE(a.per_molecule.size() == b.per_molecule.size());
    for (std::size_t i = 0; i < a.per_molecule.size(); ++i) {
        CHECK(a.per_molecule[i].id == b.per_molecule[i].id);
        CHECK(a.per_molecule[i].predicted == b.per_molecule[i].predicted);
        CHECK(a.per_molecule[i].abs_error == b.per_molecule[i].abs_error);
    }
    CHECK(a.mae_value == b.mae_value);
    REQUIRE(a.contributions.size() == b.contributions.size());
    for (std::size_t i = 0; i < a.contributions.size(); ++i) {
        CHECK(a.contributions[i].contribution == b.contributions[i].contribution);
    }
    // a different seed rearranges folds
    const auto c = run_cross_validation(d, "energy", synth_cfg(), KernelParams{0, 0},
                                        NoiseModel{0.1}, 3, 6, fast_eval());
    bool any_differs = false;
    for (std::size_t i = 0; i < a.per_molecule.size(); ++i) {
        any_differs = any_differs || a.per_molecule[i].predicted != c.per_molecule[i].predicted;
    }
    CHECK(any_differs);
}

TEST_CASE("cross-validation: stored MAEs recompute from the tables", "[eval]") {
    const auto d = testutil::random_dataset(109, 10);
    const auto report = run_cross_validation(d, "energy", synth_cfg(), KernelParams{0, 0},
                                             NoiseModel{0.1}, 5, 2, fast_eval());
    double fold_sum = 0.0;
    for (double v : report.per_fold_maes) fold_sum += v;
    CHECK(testutil::rel_diff(report.mae_value, fold_sum / 5.0) < 1e-12);

    std::vector<double> actual;
    std::vector<double> predicted;
    for (const auto& e : report.per_molecule) {
        actual.push_back(e.actual);
        predicted.push_back(e.predicted);
        CHECK(e.abs_error == std::abs(e.actual - e.predicted));
    }
    CHECK(testutil::rel_diff(report.pooled_mae, mae(actual, predicted)) < 1e-12);
}

TEST_CASE("cross-validation: worker count does not change results", "[eval]") {
    const auto d = testutil::random_dataset(127, 10);
    auto serial = fast_eval();
    serial.workers = 1;
    auto parallel = fast_eval();
    parallel.workers = 4;
    const auto a = run_cross_validation(d, "energy", synth_cfg(), KernelParams{0, 0},
                                        NoiseModel{0.1}, 3, 5, serial);
    const auto b = run_cross_validation(d, "energy", synth_cfg(), KernelParams{0, 0},
                                        NoiseModel{0.1}, 3, 5, parallel);
    for (std::size_t i = 0; i < a.per_molecule.size(); ++i) {
        CHECK(a.per_molecule[i].predicted == b.per_molecule[i].predicted);
    }
}

TEST_CASE("transferability: sizes, minimal split, degenerate boundary", "[eval]") {
    const auto d = testutil::random_dataset(113, 16);
    int max_heavy = 0;
    for (const auto& m : d.molecules) max_heavy = std::max(max_heavy, heavy_atom_count(m));

    // train on everything but the heaviest stratum
    const auto report = run_transferability(d, "energy", max_heavy - 1, synth_cfg(),
                                            KernelParams{0, 0}, NoiseModel{0.1}, fast_eval());
    CHECK(report.train_size + report.test_size == static_cast<int>(d.size()));
    CHECK(report.per_molecule.size() == static_cast<std::size_t>(report.test_size));
    CHECK(std::isfinite(report.mae_value));

    const auto degenerate = run_transferability(d, "energy", max_heavy, synth_cfg(),
                                                KernelParams{0, 0}, NoiseModel{0.1}, fast_eval());
    CHECK(degenerate.degenerate);
    CHECK(degenerate.per_molecule.empty());
    CHECK(degenerate.test_size == 0);
}

TEST_CASE("transferability: single held-out molecule", "[eval]") {
    // one heavy stratum of exactly one molecule on top
    Dataset d;
    d.source_name = "minimal";
    std::mt19937_64 rng(15);
    for (int i = 0; i < 6; ++i) {
        auto m = testutil::random_molecule(rng, {2, 3, {1, 6}, 4.0, 0.8}, "small" + std::to_string(i));
        m.properties["energy"] = -10.0 * (i + 1);
        d.molecules.push_back(std::move(m));
    }
    auto big = testutil::random_molecule(rng, {8, 8, {6, 7, 8}, 6.0, 0.9}, "big");
    big.properties["energy"] = -400.0;
    d.molecules.push_back(std::move(big));

    int small_max = 0;
    for (std::size_t i = 0; i + 1 < d.molecules.size(); ++i) {
        small_max = std::max(small_max, heavy_atom_count(d.molecules[i]));
    }
    REQUIRE(heavy_atom_count(d.molecules.back()) > small_max);
    // m-override: the auto bound from the tiny training molecules cannot cover
    // the held-out 8-atom query
    const auto report = run_transferability(d, "energy", small_max, synth_cfg(12),
                                            KernelParams{0, 0}, NoiseModel{0.1}, fast_eval());
    CHECK(report.test_size == 1);
    REQUIRE(report.per_molecule.size() == 1);
    CHECK(report.per_molecule[0].id == "big");
}

TEST_CASE("multi-property: shared configuration, per-target tables", "[eval]") {
    auto d = testutil::random_dataset(131, 12);
    std::mt19937_64 rng(8);
    for (auto& m : d.molecules) {
        m.properties["homo"] = testutil::uniform(rng, -12.0, -6.0);
    }
    const auto reports = run_multi_property(d, {"energy", "homo"}, synth_cfg(),
                                            KernelParams{5.0, 1.5}, NoiseModel{0.1}, 3, 21,
                                            fast_eval());
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].target_name == "energy");
    CHECK(reports[1].target_name == "homo");
    // identical config echo except the target name
    CHECK(reports[0].config.seed == reports[1].config.seed);
    CHECK(reports[0].config.fold_count == reports[1].config.fold_count);
    CHECK(reports[0].config.descriptor.max_occupancy == reports[1].config.descriptor.max_occupancy);
    CHECK(reports[0].config.kernel_init.sigma == reports[1].config.kernel_init.sigma);
    CHECK(reports[0].config.target_name != reports[1].config.target_name);
    // same fold structure
    for (std::size_t f = 0; f < reports[0].fold_details.size(); ++f) {
        CHECK(reports[0].fold_details[f].train_size == reports[1].fold_details[f].train_size);
    }
    // fixed kernel everywhere
    for (const auto& r : reports) {
        for (const auto& f : r.fold_details) {
            CHECK(f.kernel.sigma == 5.0);
            CHECK(f.kernel.length_scale == 1.5);
        }
    }
    // missing property is a data error
    CHECK_THROWS_AS(run_multi_property(d, {"energy", "lumo"}, synth_cfg(), KernelParams{5.0, 1.5},
                                       NoiseModel{0.1}, 3, 21, fast_eval()),
                    DataError);
}

TEST_CASE("multi-property matches the single-target fixed-kernel run bit-for-bit", "[eval]") {
    const auto d = testutil::random_dataset(137, 10);
    const KernelParams kp{4.0, 1.2};
    auto opts = fast_eval();
    opts.optimize_kernel = false;
    const auto single = run_cross_validation(d, "energy", synth_cfg(), kp, NoiseModel{0.1}, 5, 3,
                                             opts);
    const auto multi = run_multi_property(d, {"energy"}, synth_cfg(), kp, NoiseModel{0.1}, 5, 3,
                                          fast_eval());
    REQUIRE(multi.size() == 1);
    for (std::size_t i = 0; i < single.per_molecule.size(); ++i) {
        CHECK(single.per_molecule[i].predicted == multi[0].per_molecule[i].predicted);
    }
}

TEST_CASE("contributions: records reconstruct totals", "[eval]") {
    const auto d = testutil::random_dataset(139, 10);
    const auto report = run_cross_validation(d, "energy", synth_cfg(), KernelParams{0, 0},
                                             NoiseModel{0.1}, 3, 4, fast_eval(true));
    REQUIRE_FALSE(report.contributions.empty());
    std::map<std::string, double> sums;
    std::map<std::string, int> counts;
    for (const auto& rec : report.contributions) {
        sums[rec.molecule_id] += rec.contribution;
        ++counts[rec.molecule_id];
    }
    REQUIRE(sums.size() == d.size());
    for (const auto& e : report.per_molecule) {
        CHECK(testutil::rel_diff(sums.at(e.id), e.predicted) < 1e-10);
    }
    for (const auto& mol : d.molecules) {
        CHECK(counts.at(mol.id) == static_cast<int>(mol.size()));
    }
}

TEST_CASE("contributions: single-atom molecules contribute their whole total", "[eval]") {
    Dataset d;
    d.source_name = "atoms";
    for (int i = 0; i < 6; ++i) {
        Molecule m;
        m.id = "a" + std::to_string(i);
        m.atomic_numbers = {i % 2 == 0 ? 6 : 8};
        m.coordinates = {{static_cast<double>(i), 0, 0}};
        m.properties["energy"] = -30.0 * (1 + i % 2);
        d.molecules.push_back(std::move(m));
    }
    const auto model = train(d, "energy", synth_cfg(3), KernelParams{10.0, 1.0}, NoiseModel{0.01});
    const auto records = export_contributions(model, d, 1);
    REQUIRE(records.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto pred = predict(model, d.molecules[i]);
        CHECK(records[i].contribution == pred.total);
        CHECK(records[i].atom_index == 0);
    }
}

TEST_CASE("contribution summary: fixed bins and element stats", "[eval]") {
    std::vector<ContributionRecord> records;
    records.push_back({"m0", 0, 1, -70.5});
    records.push_back({"m0", 1, 1, -69.1});
    records.push_back({"m1", 0, 1, -69.9});
    records.push_back({"m1", 1, 6, -150.0});
    records.push_back({"m2", 0, 6, -148.2});
    records.push_back({"m2", 1, 8, -301.7});

    const auto summary = summarize_contributions(records, 2.0);
    CHECK(summary.bin_width == 2.0);
    REQUIRE(summary.per_element.count(1) == 1);
    const auto& hbins = summary.per_element.at(1);
    std::size_t h_total = 0;
    const HistogramBin* modal = nullptr;
    for (const auto& b : hbins) {
        h_total += b.count;
        if (modal == nullptr || b.count > modal->count) modal = &b;
    }
    CHECK(h_total == 3);
    REQUIRE(modal != nullptr);
    CHECK(modal->lo == -70.0);
    CHECK(modal->hi == -68.0);
    CHECK(modal->count == 2);

    for (const auto& stats : summary.element_stats) {
        if (stats.atomic_number == 1) {
            CHECK(stats.count == 3);
            CHECK(stats.min == -70.5);
            CHECK(stats.max == -69.1);
            CHECK(stats.mean == Approx((-70.5 - 69.1 - 69.9) / 3.0));
        }
    }
    // contiguous bins spanning the data range, edges at multiples of the width
    std::size_t overall_total = 0;
    for (std::size_t b = 0; b < summary.overall.size(); ++b) {
        overall_total += summary.overall[b].count;
        if (b > 0) CHECK(summary.overall[b].lo == summary.overall[b - 1].hi);
    }
    CHECK(overall_total == records.size());

    CHECK_THROWS_AS(summarize_contributions(records, 0.0), ConfigError);
}
