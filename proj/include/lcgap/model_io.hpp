#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcgap/errors.hpp"
#include "lcgap/gap.hpp"

namespace lcgap {

inline constexpr int model_schema_version = 1;

namespace detail {

// CRC-32 (IEEE 802.3 polynomial, reflected), the usual zlib checksum.
inline std::uint32_t crc32(const unsigned char* data, std::size_t len,
                           std::uint32_t crc = 0) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    crc ^= 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

inline std::uint32_t crc32(const std::vector<double>& values, std::uint32_t crc = 0) {
    if (values.empty()) return crc;
    // chained: feed the raw bytes continuing from a previous block's crc
    return crc32(reinterpret_cast<const unsigned char*>(values.data()),
                 values.size() * sizeof(double),
                 crc);
}

static_assert(std::endian::native == std::endian::little,
              "model files use little-endian float64 blocks");

} // namespace detail

// Model container: a text magic+version line, a one-line JSON header, a
// BINARY marker, then two raw little-endian float64 blocks (flattened
// descriptors, then weights). The header's crc32 covers both blocks' bytes.
inline void save_model(const GapModel& model, std::ostream& out) {
    std::vector<double> descriptors;
    std::size_t total_atoms = 0;
    for (const auto& g : model.training_groups) total_atoms += static_cast<std::size_t>(g.atom_count);
    const auto dim = model.training_groups.empty() ? 0 : model.training_groups.front().dim;
    descriptors.reserve(total_atoms * static_cast<std::size_t>(dim));
    for (const auto& g : model.training_groups) {
        descriptors.insert(descriptors.end(), g.values.begin(), g.values.end());
    }
    std::vector<double> weights(model.weights.data(), model.weights.data() + model.weights.size());

    std::uint32_t crc = detail::crc32(descriptors);
    crc = detail::crc32(weights, crc);

    nlohmann::ordered_json header;
    header["schema_version"] = model_schema_version;
    header["descriptor_config"] = {{"kind", to_string(model.descriptor_config.kind)},
                                   {"alpha", model.descriptor_config.alpha},
                                   {"r_cut", model.descriptor_config.r_cut},
                                   {"max_occupancy", model.descriptor_config.max_occupancy}};
    header["kernel"] = {{"sigma", model.kernel.sigma}, {"length_scale", model.kernel.length_scale}};
    header["noise"] = {{"sigma_n", model.noise.sigma_n}};
    header["target_name"] = model.target_name;
    header["applied_jitter"] = model.applied_jitter;
    header["length_unit"] = to_string(model.length_unit);
    header["descriptor_dim"] = dim;
    nlohmann::ordered_json groups = nlohmann::ordered_json::array();
    for (const auto& g : model.training_groups) {
        groups.push_back({{"id", g.molecule_id}, {"atoms", g.atom_count}});
    }
    header["groups"] = std::move(groups);
    header["checksum_crc32"] = crc;

    out << "LCGAP_MODEL " << model_schema_version << "\n";
    out << header.dump() << "\n";
    out << "BINARY\n";
    if (!descriptors.empty()) {
        out.write(reinterpret_cast<const char*>(descriptors.data()),
                  static_cast<std::streamsize>(descriptors.size() * sizeof(double)));
    }
    if (!weights.empty()) {
        out.write(reinterpret_cast<const char*>(weights.data()),
                  static_cast<std::streamsize>(weights.size() * sizeof(double)));
    }
}

inline void save_model(const GapModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open model file for writing: " + path);
    save_model(model, out);
    if (!out) throw DataError("failed writing model file: " + path);
}

inline GapModel load_model(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("model file: empty");
    if (line.rfind("LCGAP_MODEL ", 0) != 0) {
        throw DataError("model file: bad magic (not an LCGAP model)");
    }
    const std::string version_str = line.substr(12);
    if (version_str != std::to_string(model_schema_version)) {
        throw DataError("model file: unknown schema_version " + version_str + " (expected " +
                        std::to_string(model_schema_version) + ")");
    }
    if (!std::getline(in, line)) throw DataError("model file: missing header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model file: malformed header: ") + e.what());
    }
    if (!std::getline(in, line) || line != "BINARY") {
        throw DataError("model file: missing BINARY marker");
    }

    GapModel model;
    try {
        const auto& dc = header.at("descriptor_config");
        model.descriptor_config.kind = descriptor_kind_from_string(dc.at("kind").get<std::string>());
        model.descriptor_config.alpha = dc.at("alpha").get<double>();
        model.descriptor_config.r_cut = dc.at("r_cut").get<double>();
        model.descriptor_config.max_occupancy = dc.at("max_occupancy").get<int>();
        model.kernel.sigma = header.at("kernel").at("sigma").get<double>();
        model.kernel.length_scale = header.at("kernel").at("length_scale").get<double>();
        model.noise.sigma_n = header.at("noise").at("sigma_n").get<double>();
        model.target_name = header.at("target_name").get<std::string>();
        model.applied_jitter = header.at("applied_jitter").get<double>();
        model.length_unit = length_unit_from_string(header.at("length_unit").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model file: header field error: ") + e.what());
    }

    const int dim = header.at("descriptor_dim").get<int>();
    const auto expected_dim =
        descriptor_length(model.descriptor_config.kind, model.descriptor_config.max_occupancy);
    if (dim < 0 || static_cast<std::size_t>(dim) != expected_dim) {
        throw DataError("model file: descriptor_dim " + std::to_string(dim) +
                        " does not match descriptor_config (expected " +
                        std::to_string(expected_dim) + ")");
    }

    std::size_t total_atoms = 0;
    for (const auto& g : header.at("groups")) {
        DescriptorGroup group;
        group.molecule_id = g.at("id").get<std::string>();
        group.atom_count = g.at("atoms").get<int>();
        group.dim = dim;
        if (group.atom_count < 1) throw DataError("model file: group with no atoms");
        total_atoms += static_cast<std::size_t>(group.atom_count);
        model.training_groups.push_back(std::move(group));
    }

    std::vector<double> descriptors(total_atoms * static_cast<std::size_t>(dim));
    std::vector<double> weights(model.training_groups.size());
    auto read_block = [&](std::vector<double>& block, const char* what) {
        if (block.empty()) return;
        in.read(reinterpret_cast<char*>(block.data()),
                static_cast<std::streamsize>(block.size() * sizeof(double)));
        if (static_cast<std::size_t>(in.gcount()) != block.size() * sizeof(double)) {
            throw DataError(std::string("model file: truncated ") + what + " block");
        }
    };
    read_block(descriptors, "descriptor");
    read_block(weights, "weight");
    if (in.peek() != std::char_traits<char>::eof()) {
        throw DataError("model file: trailing bytes after numeric payload");
    }

    std::uint32_t crc = detail::crc32(descriptors);
    crc = detail::crc32(weights, crc);
    const auto stored = header.at("checksum_crc32").get<std::uint32_t>();
    if (crc != stored) {
        throw DataError("model file: checksum mismatch (payload corrupt)");
    }

    std::size_t offset = 0;
    for (auto& g : model.training_groups) {
        const auto count = static_cast<std::size_t>(g.atom_count) * static_cast<std::size_t>(dim);
        g.values.assign(descriptors.begin() + static_cast<std::ptrdiff_t>(offset),
                        descriptors.begin() + static_cast<std::ptrdiff_t>(offset + count));
        offset += count;
    }
    model.weights = Eigen::Map<const Eigen::VectorXd>(weights.data(),
                                                      static_cast<Eigen::Index>(weights.size()));
    return model;
}

inline GapModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file: " + path);
    try {
        return load_model(in);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

} // namespace lcgap
