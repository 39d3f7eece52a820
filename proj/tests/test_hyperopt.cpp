#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace lcgap;
using Catch::Approx;

namespace {

DescriptorConfig synth_cfg(int m = 16) {
    DescriptorConfig cfg;
    cfg.kind = DescriptorKind::reduced;
    cfg.alpha = 3.0;
    cfg.r_cut = 4.0;
    cfg.max_occupancy = m;
    return cfg;
}

NllOptOptions fast_opts() {
    NllOptOptions o;
    o.lattice_points = 5;
    o.rounds = 2;
    o.workers = 1;
    return o;
}

} // namespace

TEST_CASE("zero targets favor small amplitude", "[hyperopt]") {
    auto d = testutil::random_dataset(67, 10);
    for (auto& m : d.molecules) m.properties["energy"] = 0.0;
    const auto groups = compute_descriptor_groups(d, synth_cfg());
    const std::vector<double> y(d.size(), 0.0);
    const KernelParams init{2.0, 1.0};
    const auto result = optimize_kernel_params(groups, y, init, NoiseModel{0.1}, fast_opts());
    CHECK(result.kernel.sigma <= init.sigma);
}

TEST_CASE("optimizer is deterministic", "[hyperopt]") {
    const auto d = testutil::random_dataset(71, 12);
    const auto groups = compute_descriptor_groups(d, synth_cfg());
    std::vector<double> y;
    for (const auto& m : d.molecules) y.push_back(m.properties.at("energy"));
    const auto a = optimize_kernel_params(groups, y, KernelParams{1.0, 1.0}, NoiseModel{0.1},
                                          fast_opts());
    const auto b = optimize_kernel_params(groups, y, KernelParams{1.0, 1.0}, NoiseModel{0.1},
                                          fast_opts());
    CHECK(a.kernel.sigma == b.kernel.sigma);
    CHECK(a.kernel.length_scale == b.kernel.length_scale);
    CHECK(a.nll == b.nll);
}

TEST_CASE("optimizer never returns worse than the initialization", "[hyperopt]") {
    const auto d = testutil::random_dataset(73, 30);
    const auto groups = compute_descriptor_groups(d, synth_cfg());
    std::vector<double> y;
    for (const auto& m : d.molecules) y.push_back(m.properties.at("energy"));
    const KernelParams init{3.0, 1.0};
    const NoiseModel noise{0.1};
    const double init_nll = nll_from_groups(groups, y, init, noise, 1);
    const auto result = optimize_kernel_params(groups, y, init, noise, fast_opts());
    CHECK(result.nll <= init_nll + 1e-12);
    CHECK(result.evaluations > 0);
}

TEST_CASE("optional noise axis stays positive and is searched", "[hyperopt]") {
    const auto d = testutil::random_dataset(79, 10);
    const auto groups = compute_descriptor_groups(d, synth_cfg());
    std::vector<double> y;
    for (const auto& m : d.molecules) y.push_back(m.properties.at("energy"));
    auto opts = fast_opts();
    opts.optimize_noise = true;
    const auto result =
        optimize_kernel_params(groups, y, KernelParams{1.0, 1.0}, NoiseModel{0.5}, opts);
    CHECK(result.noise.sigma_n > 0.0);
}

TEST_CASE("default kernel init is positive and data-driven", "[hyperopt]") {
    const auto d = testutil::random_dataset(83, 15);
    const auto groups = compute_descriptor_groups(d, synth_cfg());
    std::vector<double> y;
    for (const auto& m : d.molecules) y.push_back(m.properties.at("energy"));
    const auto kp = default_kernel_init(groups, y);
    CHECK(kp.sigma > 0.0);
    CHECK(kp.length_scale > 0.0);
    const auto resolved = resolve_kernel_init(KernelParams{0.0, 7.5}, groups, y);
    CHECK(resolved.sigma == kp.sigma);
    CHECK(resolved.length_scale == 7.5);
}

TEST_CASE("hyper grid validation", "[hyperopt]") {
    HyperGrid ok{{3.0, 4.0}, {3.0, 3.5}};
    CHECK_NOTHROW(ok.validate());
    CHECK_THROWS_AS((HyperGrid{{}, {3.0}}.validate()), ConfigError);
    CHECK_THROWS_AS((HyperGrid{{3.0, 3.0}, {3.0}}.validate()), ConfigError);
    CHECK_THROWS_AS((HyperGrid{{4.0, 3.0}, {3.0}}.validate()), ConfigError);
    CHECK_THROWS_AS((HyperGrid{{-1.0, 3.0}, {3.0}}.validate()), ConfigError);
}

TEST_CASE("grid search: singleton grid and trace bookkeeping", "[hyperopt]") {
    const auto d = testutil::random_dataset(89, 12);
    GridSearchArgs args;
    args.kernel_init = KernelParams{0.0, 0.0};
    args.noise = NoiseModel{0.1};
    args.fold_count = 3;
    args.seed = 7;
    args.nll = fast_opts();
    args.workers = 1;

    const HyperGrid single{{3.0}, {3.5}};
    const auto res =
        grid_search(d, "energy", DescriptorKind::reduced, single, Protocol::cv, args);
    REQUIRE(res.trace.size() == 1);
    CHECK(res.best_alpha == 3.0);
    CHECK(res.best_r_cut == 3.5);
    CHECK(res.trace[0].ok);
    CHECK(res.score == res.trace[0].score);
}

TEST_CASE("grid search: full trace, row-major tie-break, score is the minimum", "[hyperopt]") {
    const auto d = testutil::random_dataset(97, 10);
    GridSearchArgs args;
    args.kernel_init = KernelParams{0.0, 0.0};
    args.noise = NoiseModel{0.1};
    args.fold_count = 2;
    args.seed = 3;
    args.nll = fast_opts();
    args.workers = 1;

    const HyperGrid grid{{2.0, 3.0}, {2.5, 3.5}};
    const auto res = grid_search(d, "energy", DescriptorKind::reduced, grid, Protocol::cv, args);
    REQUIRE(res.trace.size() == 4);
    // alpha-major enumeration
    CHECK(res.trace[0].alpha == 2.0);
    CHECK(res.trace[0].r_cut == 2.5);
    CHECK(res.trace[1].alpha == 2.0);
    CHECK(res.trace[1].r_cut == 3.5);
    CHECK(res.trace[2].alpha == 3.0);
    double best = std::numeric_limits<double>::infinity();
    bool best_found = false;
    for (const auto& p : res.trace) {
        if (p.ok && p.score < best) best = p.score;
        if (p.alpha == res.best_alpha && p.r_cut == res.best_r_cut) best_found = true;
    }
    CHECK(res.score == best);
    CHECK(best_found);
}

TEST_CASE("grid search: failed points stay in the trace", "[hyperopt]") {
    // bonds shorter than 1 make 1/d^alpha overflow for an absurd exponent, so
    // the second alpha fails while the first succeeds
    Dataset d;
    d.source_name = "short_bonds";
    const std::vector<double> bonds{0.30, 0.32, 0.34, 0.36, 0.38, 0.40};
    for (std::size_t i = 0; i < bonds.size(); ++i) {
        Molecule m;
        m.id = "h2_" + std::to_string(i);
        m.atomic_numbers = {1, 1};
        m.coordinates = {{0, 0, 0}, {0, 0, bonds[i]}};
        m.properties["energy"] = -100.0 - static_cast<double>(i);
        d.molecules.push_back(std::move(m));
    }
    GridSearchArgs args;
    args.kernel_init = KernelParams{0.0, 0.0};
    args.noise = NoiseModel{0.1};
    args.fold_count = 2;
    args.seed = 11;
    args.nll = fast_opts();
    args.workers = 1;

    const HyperGrid grid{{3.0, 5000.0}, {3.0}};
    const auto res = grid_search(d, "energy", DescriptorKind::reduced, grid, Protocol::cv, args);
    REQUIRE(res.trace.size() == 2);
    CHECK(res.trace[0].ok);
    CHECK_FALSE(res.trace[1].ok);
    CHECK_FALSE(res.trace[1].error.empty());
    CHECK(res.best_alpha == 3.0);

    const HyperGrid all_bad{{4000.0, 5000.0}, {3.0}};
    CHECK_THROWS_AS(grid_search(d, "energy", DescriptorKind::reduced, all_bad, Protocol::cv, args),
                    NumericError);
}
