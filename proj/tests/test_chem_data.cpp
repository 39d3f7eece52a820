#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>
#include <sstream>

#include "test_support.hpp"

using namespace lcgap;

namespace {

Dataset parse_extxyz_string(const std::string& text) {
    std::istringstream in(text);
    return parse_dataset_stream(in, DatasetFormat::extxyz, "test");
}

} // namespace

TEST_CASE("extxyz: minimal H2 record", "[chem]") {
    const auto d = parse_extxyz_string(
        "2\n"
        "id=h2 atomization_energy=-104.2 unit=angstrom\n"
        "H 0.0 0.0 0.0\n"
        "H 0.0 0.0 0.74\n");
    REQUIRE(d.size() == 1);
    const auto& m = d.molecules[0];
    CHECK(m.id == "h2");
    CHECK(m.size() == 2);
    CHECK(m.atomic_numbers == std::vector<int>{1, 1});
    CHECK(m.property("atomization_energy") == -104.2);
    CHECK(d.length_unit == LengthUnit::angstrom);
}

TEST_CASE("extxyz: numeric Z tokens and blank separators", "[chem]") {
    const auto d = parse_extxyz_string(
        "1\n"
        "id=a e=1.0\n"
        "6 0 0 0\n"
        "\n"
        "\n"
        "1\n"
        "id=b e=2.0\n"
        "C 1 0 0\n");
    REQUIRE(d.size() == 2);
    CHECK(d.molecules[0].atomic_numbers[0] == 6);
    CHECK(d.molecules[1].atomic_numbers[0] == 6);
    CHECK(d.length_unit == LengthUnit::unspecified);
}

TEST_CASE("extxyz: declared atom count mismatch names the record", "[chem]") {
    try {
        parse_extxyz_string(
            "3\n"
            "id=bad e=1.0\n"
            "H 0 0 0\n"
            "H 1 0 0\n");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("record 0") != std::string::npos);
    }
}

TEST_CASE("extxyz: malformed atom line reports the line", "[chem]") {
    try {
        parse_extxyz_string(
            "1\n"
            "id=bad e=1.0\n"
            "H 0 zero 0\n");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("extxyz: duplicate ids rejected", "[chem]") {
    CHECK_THROWS_AS(parse_extxyz_string("1\nid=x e=1\nH 0 0 0\n\n1\nid=x e=2\nH 1 0 0\n"),
                    DataError);
}

TEST_CASE("extxyz: coincident atoms rejected", "[chem]") {
    CHECK_THROWS_AS(parse_extxyz_string("2\nid=x e=1\nH 0 0 0\nH 0 0 0\n"), DataError);
}

TEST_CASE("extxyz: dummy atomic number rejected on ingest", "[chem]") {
    CHECK_THROWS_AS(parse_extxyz_string("1\nid=x e=1\n0 0 0 0\n"), DataError);
}

TEST_CASE("extxyz: non-numeric property value rejected", "[chem]") {
    CHECK_THROWS_AS(parse_extxyz_string("1\nid=x note=hello\nH 0 0 0\n"), DataError);
}

TEST_CASE("extxyz: missing id rejected", "[chem]") {
    CHECK_THROWS_AS(parse_extxyz_string("1\ne=1.0\nH 0 0 0\n"), DataError);
}

TEST_CASE("extxyz: conflicting unit tags rejected", "[chem]") {
    CHECK_THROWS_AS(parse_extxyz_string("1\nid=a unit=bohr e=1\nH 0 0 0\n"
                                        "1\nid=b unit=angstrom e=1\nH 1 0 0\n"),
                    DataError);
}

TEST_CASE("csv_xyz: header-driven parse", "[chem]") {
    const std::string text =
        "id,n_atoms,energy,z_1,x_1,y_1,zc_1,z_2,x_2,y_2,zc_2\n"
        "h2,2,-104.2,H,0,0,0,H,0,0,0.74\n"
        "h,1,-13.6,1,0,0,0,,,,\n";
    std::istringstream in(text);
    const auto d = parse_dataset_stream(in, DatasetFormat::csv_xyz, "csv");
    REQUIRE(d.size() == 2);
    CHECK(d.molecules[0].size() == 2);
    CHECK(d.molecules[0].property("energy") == -104.2);
    CHECK(d.molecules[1].size() == 1);
    CHECK(d.molecules[1].atomic_numbers[0] == 1);
}

TEST_CASE("csv_xyz: missing atom columns rejected", "[chem]") {
    const std::string text =
        "id,n_atoms,energy,z_1,x_1,y_1,zc_1\n"
        "x,2,-1.0,H,0,0,0\n";
    std::istringstream in(text);
    CHECK_THROWS_AS(parse_dataset_stream(in, DatasetFormat::csv_xyz, "csv"), DataError);
}

TEST_CASE("round-trip: write then re-parse is identical", "[chem]") {
    auto d = testutil::random_dataset(7, 12);
    d.length_unit = LengthUnit::bohr;
    d.molecules[3].properties["homo"] = -0.123456789012345678;
    std::ostringstream out;
    write_extxyz(d, out);
    std::istringstream in(out.str());
    const auto d2 = parse_dataset_stream(in, DatasetFormat::extxyz, d.source_name);
    REQUIRE(d2.size() == d.size());
    CHECK(d2.length_unit == d.length_unit);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto& a = d.molecules[i];
        const auto& b = d2.molecules[i];
        CHECK(a.id == b.id);
        CHECK(a.atomic_numbers == b.atomic_numbers);
        REQUIRE(a.coordinates.size() == b.coordinates.size());
        for (std::size_t j = 0; j < a.coordinates.size(); ++j) {
            CHECK(a.coordinates[j] == b.coordinates[j]); // bit-exact via %.17g
        }
        CHECK(a.properties == b.properties);
    }
}

TEST_CASE("heavy_atom_count definition", "[chem]") {
    Molecule ch4;
    ch4.id = "ch4";
    ch4.atomic_numbers = {6, 1, 1, 1, 1};
    ch4.coordinates = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 1}};
    CHECK(heavy_atom_count(ch4) == 1);

    Molecule h2;
    h2.id = "h2";
    h2.atomic_numbers = {1, 1};
    h2.coordinates = {{0, 0, 0}, {0, 0, 0.74}};
    CHECK(heavy_atom_count(h2) == 0);
}

TEST_CASE("subset_by_max_heavy_atoms: filtering, naming, monotonicity", "[chem]") {
    const auto d = testutil::random_dataset(11, 30);
    int max_heavy = 0;
    for (const auto& m : d.molecules) max_heavy = std::max(max_heavy, heavy_atom_count(m));

    const auto sub3 = subset_by_max_heavy_atoms(d, 3);
    CHECK(sub3.source_name == "synthetic_3");
    for (const auto& m : sub3.molecules) CHECK(heavy_atom_count(m) <= 3);

    // order preserved
    std::size_t cursor = 0;
    for (const auto& m : d.molecules) {
        if (cursor < sub3.size() && sub3.molecules[cursor].id == m.id) ++cursor;
    }
    CHECK(cursor == sub3.size());

    // n at or beyond the max heavy count is a no-op
    CHECK(subset_by_max_heavy_atoms(d, max_heavy).size() == d.size());

    // monotone in n
    for (int n = 1; n < max_heavy; ++n) {
        const auto a = subset_by_max_heavy_atoms(d, n);
        const auto b = subset_by_max_heavy_atoms(d, n + 1);
        CHECK(a.size() <= b.size());
        std::set<std::string> b_ids;
        for (const auto& m : b.molecules) b_ids.insert(m.id);
        for (const auto& m : a.molecules) CHECK(b_ids.count(m.id) == 1);
    }
}

TEST_CASE("transferability_split partitions the dataset", "[chem]") {
    const auto d = testutil::random_dataset(13, 25);
    int max_heavy = 0;
    for (const auto& m : d.molecules) max_heavy = std::max(max_heavy, heavy_atom_count(m));
    for (int n = 1; n <= max_heavy; ++n) {
        const auto s = transferability_split(d, n);
        CHECK(s.train.size() + s.test.size() == d.size());
        std::set<std::string> ids;
        for (const auto& m : s.train.molecules) ids.insert(m.id);
        for (const auto& m : s.test.molecules) ids.insert(m.id);
        CHECK(ids.size() == d.size());
        for (const auto& m : s.train.molecules) CHECK(heavy_atom_count(m) <= n);
        for (const auto& m : s.test.molecules) CHECK(heavy_atom_count(m) > n);
    }
    CHECK(transferability_split(d, max_heavy).degenerate);
}

TEST_CASE("make_folds: balance and determinism", "[chem]") {
    const auto d10 = testutil::random_dataset(17, 10);
    const auto f = make_folds(d10, 5, 99);
    std::map<int, int> sizes;
    for (int fold : f.assignment) ++sizes[fold];
    REQUIRE(sizes.size() == 5);
    for (const auto& [fold, count] : sizes) CHECK(count == 2);

    const auto f2 = make_folds(d10, 5, 99);
    CHECK(f.assignment == f2.assignment);
    const auto f3 = make_folds(d10, 5, 100);
    CHECK(f.assignment != f3.assignment);

    const auto d7 = testutil::random_dataset(19, 7);
    const auto g = make_folds(d7, 5, 1);
    std::map<int, int> gsizes;
    for (int fold : g.assignment) ++gsizes[fold];
    REQUIRE(gsizes.size() == 5);
    std::multiset<int> counts;
    for (const auto& [fold, count] : gsizes) counts.insert(count);
    CHECK(counts == std::multiset<int>{1, 1, 1, 2, 2});

    CHECK_THROWS_AS(make_folds(d7, 8, 1), DataError);
    CHECK_THROWS_AS(make_folds(d7, 1, 1), ConfigError);
}

TEST_CASE("make_folds: balanced partition property", "[chem]") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = testutil::uniform_int(rng, 5, 40);
        const int k = testutil::uniform_int(rng, 2, std::min(n, 8));
        const auto d = testutil::random_dataset(static_cast<std::uint64_t>(trial) + 100, n);
        const auto f = make_folds(d, k, static_cast<std::uint64_t>(trial));
        std::map<int, int> sizes;
        for (int fold : f.assignment) {
            CHECK(fold >= 0);
            CHECK(fold < k);
            ++sizes[fold];
        }
        REQUIRE(static_cast<int>(sizes.size()) == k);
        int lo = n;
        int hi = 0;
        for (const auto& [fold, count] : sizes) {
            lo = std::min(lo, count);
            hi = std::max(hi, count);
        }
        CHECK(hi - lo <= 1);
    }
}
