// SPDX-License-Identifier: Apache-2.0
#include "gsd/raster_io.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>

namespace gsd {

namespace {

void append_f32(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open for writing: " + tmp.string());
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        f.flush();
        if (!f) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot rename onto " + path.string());
    }
}

std::string encode_f32(const Raster& r) {
    std::string out;
    out.reserve(r.values.size() * 4);
    for (double v : r.values) append_f32(out, v);
    return out;
}

std::string encode_f32(const Eigen::MatrixXd& m) {
    std::string out;
    out.reserve(static_cast<std::size_t>(m.size()) * 4);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) append_f32(out, m(i, j));
    }
    return out;
}

void write_raster_f32(const std::filesystem::path& path, const Raster& raster) {
    write_file_atomic(path, encode_f32(raster));
}

void write_matrix_f32(const std::filesystem::path& path, const Eigen::MatrixXd& matrix) {
    write_file_atomic(path, encode_f32(matrix));
}

Raster read_raster_f32(const std::filesystem::path& path, int height, int width, int channels) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Raster r(height, width, channels, true);
    if (bytes.size() != r.values.size() * 4) throw IoError("size mismatch reading " + path.string());
    for (std::size_t i = 0; i < r.values.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
            bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + b])) << (8 * b);
        }
        r.values[i] = std::bit_cast<float>(bits);
    }
    return r;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string raster_csv(const Raster& r) {
    std::string out = "x,y,channel,value\n";
    for (int y = 0; y < r.height; ++y) {
        for (int x = 0; x < r.width; ++x) {
            for (int c = 0; c < r.channels; ++c) {
                out += std::to_string(x) + ',' + std::to_string(y) + ',' + std::to_string(c) + ',' +
                       format_double(r.at(x, y, c)) + '\n';
            }
        }
    }
    return out;
}

}  // namespace gsd
