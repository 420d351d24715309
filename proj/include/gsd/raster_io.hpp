// SPDX-License-Identifier: Apache-2.0
//
// Flat binary and CSV serialisation for rasters and matrices. Binary files are
// headerless little-endian float32 in row-major order (channels innermost);
// shape travels in a sidecar written by the caller.
#pragma once

#include "gsd/raster.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gsd {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string encode_f32(const Raster& raster);
std::string encode_f32(const Eigen::MatrixXd& matrix);

void write_raster_f32(const std::filesystem::path& path, const Raster& raster);
/// Throws IoError on a size mismatch or unreadable file. Coverage is set.
Raster read_raster_f32(const std::filesystem::path& path, int height, int width, int channels);

/// Columns x,y,channel,value; uncovered pixels included.
std::string raster_csv(const Raster& raster);

void write_matrix_f32(const std::filesystem::path& path, const Eigen::MatrixXd& matrix);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace gsd
