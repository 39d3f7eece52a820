#pragma once

#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>

#include "lcgap/errors.hpp"

namespace lcgap {

inline constexpr int max_atomic_number = 118;

namespace detail {

inline constexpr std::array<std::string_view, max_atomic_number + 1> element_symbols = {
    "X", // Z=0: dummy placeholder, never accepted from input
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne",
    "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K", "Ca",
    "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr",
    "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn",
    "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb",
    "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg",
    "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
    "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm",
    "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds",
    "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

} // namespace detail

// Standard symbol for an atomic number, e.g. 6 -> "C".
inline std::string element_symbol(int z) {
    if (z < 1 || z > max_atomic_number) {
        throw DataError("atomic number out of range: " + std::to_string(z));
    }
    return std::string(detail::element_symbols[static_cast<std::size_t>(z)]);
}

inline std::optional<int> try_symbol_to_z(std::string_view symbol) {
    for (int z = 1; z <= max_atomic_number; ++z) {
        if (detail::element_symbols[static_cast<std::size_t>(z)] == symbol) return z;
    }
    return std::nullopt;
}

// Accepts a standard element symbol ("H", "Cl", ...) or a plain integer Z.
inline int parse_element_token(std::string_view token) {
    if (!token.empty() && (std::isdigit(static_cast<unsigned char>(token.front())) != 0)) {
        int z = 0;
        for (char c : token) {
            if (!std::isdigit(static_cast<unsigned char>(c))) {
                throw DataError("malformed element token: '" + std::string(token) + "'");
            }
            z = z * 10 + (c - '0');
            if (z > max_atomic_number) break;
        }
        if (z < 1 || z > max_atomic_number) {
            throw DataError("atomic number out of range: '" + std::string(token) + "'");
        }
        return z;
    }
    if (auto z = try_symbol_to_z(token)) return *z;
    throw DataError("unknown element symbol: '" + std::string(token) + "'");
}

} // namespace lcgap
