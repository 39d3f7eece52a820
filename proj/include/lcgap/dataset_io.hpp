#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lcgap/elements.hpp"
#include "lcgap/errors.hpp"
#include "lcgap/format.hpp"
#include "lcgap/molecule.hpp"

namespace lcgap {

enum class DatasetFormat { extxyz, csv_xyz };

inline DatasetFormat dataset_format_from_string(const std::string& s) {
    if (s == "extxyz") return DatasetFormat::extxyz;
    if (s == "csv_xyz") return DatasetFormat::csv_xyz;
    throw ConfigError("unknown dataset format: '" + s + "' (expected extxyz or csv_xyz)");
}

namespace detail {

struct RecordContext {
    std::size_t record = 0;
    std::size_t line = 0;

    std::string where() const {
        return "record " + std::to_string(record) + " (line " + std::to_string(line) + ")";
    }
};

// Metadata line: space-separated key=value pairs. id is required; unit is the
// optional length-unit tag; every other value must parse as a real property.
inline void parse_metadata(std::string_view meta, const RecordContext& ctx, Molecule& mol,
                           LengthUnit& unit) {
    unit = LengthUnit::unspecified;
    bool have_id = false;
    for (auto tok : tokens(meta)) {
        const auto eq = tok.find('=');
        if (eq == std::string_view::npos || eq == 0) {
            throw DataError(ctx.where() + ": malformed metadata token '" + std::string(tok) +
                            "' (expected key=value)");
        }
        const std::string key(tok.substr(0, eq));
        const std::string value(tok.substr(eq + 1));
        if (key == "id") {
            mol.id = value;
            have_id = true;
        } else if (key == "unit") {
            unit = length_unit_from_string(value);
        } else {
            double v = 0;
            if (!parse_double(value, v)) {
                throw DataError(ctx.where() + ": property '" + key +
                                "' has non-numeric value '" + value + "'");
            }
            mol.properties[key] = v;
        }
    }
    if (!have_id) throw DataError(ctx.where() + ": metadata line has no id=<string> key");
}

inline void merge_record_unit(LengthUnit record_unit, LengthUnit& dataset_unit, bool first,
                              const RecordContext& ctx) {
    if (first) {
        dataset_unit = record_unit;
    } else if (record_unit != dataset_unit) {
        throw DataError(ctx.where() + ": unit tag '" + to_string(record_unit) +
                        "' disagrees with earlier records ('" + to_string(dataset_unit) + "')");
    }
}

inline Dataset parse_extxyz_stream(std::istream& in, const std::string& source_name) {
    Dataset ds;
    ds.source_name = source_name;
    std::string line;
    std::size_t line_no = 0;
    std::size_t record_no = 0;
    bool first_record = true;
    while (true) {
        // skip blank lines between records
        bool have_line = false;
        while (std::getline(in, line)) {
            ++line_no;
            if (!trim(line).empty()) {
                have_line = true;
                break;
            }
        }
        if (!have_line) break;

        RecordContext ctx{record_no, line_no};
        double natoms_val = 0;
        const auto count_tok = trim(line);
        if (!parse_double(count_tok, natoms_val) || natoms_val < 1 ||
            natoms_val != static_cast<double>(static_cast<long>(natoms_val))) {
            throw DataError(ctx.where() + ": expected positive atom count, got '" +
                            std::string(count_tok) + "'");
        }
        const auto natoms = static_cast<std::size_t>(natoms_val);

        if (!std::getline(in, line)) {
            throw DataError(ctx.where() + ": missing metadata line");
        }
        ++line_no;
        Molecule mol;
        LengthUnit record_unit = LengthUnit::unspecified;
        parse_metadata(line, ctx, mol, record_unit);
        merge_record_unit(record_unit, ds.length_unit, first_record, ctx);
        first_record = false;

        mol.atomic_numbers.reserve(natoms);
        mol.coordinates.reserve(natoms);
        for (std::size_t i = 0; i < natoms; ++i) {
            if (!std::getline(in, line) || trim(line).empty()) {
                throw DataError(ctx.where() + ": declared " + std::to_string(natoms) +
                                " atoms but atom line " + std::to_string(i + 1) +
                                " is missing");
            }
            ++line_no;
            const auto toks = tokens(line);
            if (toks.size() != 4) {
                throw DataError("record " + std::to_string(record_no) + " (line " +
                                std::to_string(line_no) + "): expected '<element> <x> <y> <z>', got '" +
                                std::string(trim(line)) + "'");
            }
            Vec3 r{};
            for (int c = 0; c < 3; ++c) {
                if (!parse_double(toks[static_cast<std::size_t>(c + 1)], r[static_cast<std::size_t>(c)])) {
                    throw DataError("record " + std::to_string(record_no) + " (line " +
                                    std::to_string(line_no) + "): malformed coordinate '" +
                                    std::string(toks[static_cast<std::size_t>(c + 1)]) + "'");
                }
            }
            mol.atomic_numbers.push_back(parse_element_token(toks[0]));
            mol.coordinates.push_back(r);
        }
        validate_molecule(mol, "record " + std::to_string(record_no) + " (id='" + mol.id + "')");
        ds.molecules.push_back(std::move(mol));
        ++record_no;
    }
    validate_dataset(ds);
    return ds;
}

// csv_xyz: one header row naming the columns. Recognized headers are id,
// n_atoms, unit, z_<i>, x_<i>, y_<i>, zc_<i> (1-based atom index); any other
// header is a molecule property. Cells beyond n_atoms stay empty.
inline Dataset parse_csv_stream(std::istream& in, const std::string& source_name) {
    Dataset ds;
    ds.source_name = source_name;
    std::string line;
    if (!std::getline(in, line)) throw DataError("csv_xyz: empty file");

    enum class Role { id, n_atoms, unit, z, x, y, zc, property };
    struct Column {
        Role role;
        std::size_t atom = 0; // 0-based, for z/x/y/zc
        std::string name;     // for properties
    };
    std::vector<Column> columns;
    std::size_t max_atoms = 0;
    for (auto h : detail::split(line, ',')) {
        const std::string name(trim(h));
        Column col{Role::property, 0, name};
        auto atom_col = [&](std::string_view prefix, Role role) {
            if (name.size() > prefix.size() && name.compare(0, prefix.size(), prefix) == 0) {
                double idx = 0;
                if (parse_double(name.substr(prefix.size()), idx) && idx >= 1) {
                    col.role = role;
                    col.atom = static_cast<std::size_t>(idx) - 1;
                    max_atoms = std::max(max_atoms, col.atom + 1);
                    return true;
                }
            }
            return false;
        };
        if (name == "id") {
            col.role = Role::id;
        } else if (name == "n_atoms") {
            col.role = Role::n_atoms;
        } else if (name == "unit") {
            col.role = Role::unit;
        } else if (atom_col("zc_", Role::zc) || atom_col("z_", Role::z) ||
                   atom_col("x_", Role::x) || atom_col("y_", Role::y)) {
            // role set by atom_col
        }
        columns.push_back(col);
    }

    std::size_t line_no = 1;
    std::size_t record_no = 0;
    bool first_record = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        RecordContext ctx{record_no, line_no};
        const auto cells = detail::split(line, ',');
        if (cells.size() != columns.size()) {
            throw DataError(ctx.where() + ": expected " + std::to_string(columns.size()) +
                            " cells, got " + std::to_string(cells.size()));
        }
        Molecule mol;
        LengthUnit record_unit = LengthUnit::unspecified;
        std::size_t natoms = 0;
        std::vector<int> zs(max_atoms, 0);
        std::vector<Vec3> rs(max_atoms, Vec3{0, 0, 0});
        std::vector<bool> have_z(max_atoms, false);
        bool have_id = false;
        for (std::size_t c = 0; c < columns.size(); ++c) {
            const auto cell = trim(cells[c]);
            const auto& col = columns[c];
            if (cell.empty() && col.role != Role::id) continue;
            double v = 0;
            switch (col.role) {
            case Role::id:
                mol.id = std::string(cell);
                have_id = !mol.id.empty();
                break;
            case Role::n_atoms:
                if (!parse_double(cell, v) || v < 1) {
                    throw DataError(ctx.where() + ": bad n_atoms '" + std::string(cell) + "'");
                }
                natoms = static_cast<std::size_t>(v);
                break;
            case Role::unit:
                record_unit = length_unit_from_string(std::string(cell));
                break;
            case Role::z:
                zs[col.atom] = parse_element_token(cell);
                have_z[col.atom] = true;
                break;
            case Role::x:
            case Role::y:
            case Role::zc: {
                if (!parse_double(cell, v)) {
                    throw DataError(ctx.where() + ": malformed coordinate '" + std::string(cell) + "'");
                }
                const std::size_t axis = col.role == Role::x ? 0 : (col.role == Role::y ? 1 : 2);
                rs[col.atom][axis] = v;
                break;
            }
            case Role::property:
                if (!parse_double(cell, v)) {
                    throw DataError(ctx.where() + ": property '" + col.name +
                                    "' has non-numeric value '" + std::string(cell) + "'");
                }
                mol.properties[col.name] = v;
                break;
            }
        }
        if (!have_id) throw DataError(ctx.where() + ": missing id");
        if (natoms == 0) throw DataError(ctx.where() + ": missing n_atoms");
        for (std::size_t i = 0; i < natoms; ++i) {
            if (i >= max_atoms || !have_z[i]) {
                throw DataError(ctx.where() + ": declared " + std::to_string(natoms) +
                                " atoms but atom " + std::to_string(i + 1) + " has no z_ column value");
            }
            mol.atomic_numbers.push_back(zs[i]);
            mol.coordinates.push_back(rs[i]);
        }
        merge_record_unit(record_unit, ds.length_unit, first_record, ctx);
        first_record = false;
        validate_molecule(mol, "record " + std::to_string(record_no) + " (id='" + mol.id + "')");
        ds.molecules.push_back(std::move(mol));
        ++record_no;
    }
    validate_dataset(ds);
    return ds;
}

} // namespace detail

inline Dataset parse_dataset_stream(std::istream& in, DatasetFormat format,
                                    const std::string& source_name) {
    return format == DatasetFormat::extxyz ? detail::parse_extxyz_stream(in, source_name)
                                           : detail::parse_csv_stream(in, source_name);
}

inline Dataset parse_dataset(const std::string& path, DatasetFormat format) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file: " + path);
    const std::string stem = std::filesystem::path(path).stem().string();
    try {
        return parse_dataset_stream(in, format, stem);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

inline void write_extxyz(const Dataset& d, std::ostream& out) {
    for (const auto& m : d.molecules) {
        out << m.size() << "\n";
        out << "id=" << m.id;
        if (d.length_unit != LengthUnit::unspecified) {
            out << " unit=" << to_string(d.length_unit);
        }
        for (const auto& [k, v] : m.properties) {
            out << " " << k << "=" << format_double17(v);
        }
        out << "\n";
        for (std::size_t i = 0; i < m.size(); ++i) {
            out << element_symbol(m.atomic_numbers[i]) << " "
                << format_double17(m.coordinates[i][0]) << " "
                << format_double17(m.coordinates[i][1]) << " "
                << format_double17(m.coordinates[i][2]) << "\n";
        }
    }
}

inline void write_extxyz(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open output file: " + path);
    write_extxyz(d, out);
}

} // namespace lcgap
