// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "gsd/geometry.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsd {

struct PlyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Scalar properties of the "vertex" element, converted to double.
/// List properties are skipped.
struct PlyVertexTable {
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;
    std::size_t rows = 0;

    bool has(const std::string& name) const;
    const std::vector<double>& column(const std::string& name) const;
};

/// Reads ascii, binary_little_endian and binary_big_endian PLY files.
PlyVertexTable read_ply_vertices(const std::filesystem::path& path);

/// Requires x, y and z; every other property is ignored.
PointCloud read_ply_points(const std::filesystem::path& path);

/// Writes binary_little_endian PLY with one `double` property per column.
void write_ply_vertices(const std::filesystem::path& path, const std::vector<std::string>& names,
                        const std::vector<std::vector<double>>& columns);

}  // namespace gsd
