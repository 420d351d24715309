// SPDX-License-Identifier: Apache-2.0
#include "gsd/ply.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gsd {

namespace {

enum class Format { ascii, binary_le, binary_be };

enum class Scalar { i8, u8, i16, u16, i32, u32, f32, f64 };

Scalar parse_scalar(const std::string& t) {
    if (t == "char" || t == "int8") return Scalar::i8;
    if (t == "uchar" || t == "uint8") return Scalar::u8;
    if (t == "short" || t == "int16") return Scalar::i16;
    if (t == "ushort" || t == "uint16") return Scalar::u16;
    if (t == "int" || t == "int32") return Scalar::i32;
    if (t == "uint" || t == "uint32") return Scalar::u32;
    if (t == "float" || t == "float32") return Scalar::f32;
    if (t == "double" || t == "float64") return Scalar::f64;
    throw PlyError("unknown PLY property type '" + t + "'");
}

std::size_t scalar_size(Scalar s) {
    switch (s) {
        case Scalar::i8:
        case Scalar::u8: return 1;
        case Scalar::i16:
        case Scalar::u16: return 2;
        case Scalar::i32:
        case Scalar::u32:
        case Scalar::f32: return 4;
        case Scalar::f64: return 8;
    }
    return 0;
}

struct Property {
    std::string name;
    Scalar type = Scalar::f32;
    bool is_list = false;
    Scalar count_type = Scalar::u8;
};

struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Property> properties;
};

template <class T>
T load(const char* bytes, bool swap) {
    T v;
    if (!swap) {
        std::memcpy(&v, bytes, sizeof(T));
        return v;
    }
    char tmp[sizeof(T)];
    std::reverse_copy(bytes, bytes + sizeof(T), tmp);
    std::memcpy(&v, tmp, sizeof(T));
    return v;
}

double read_binary(std::istream& in, Scalar s, bool swap) {
    char buf[8];
    const auto n = scalar_size(s);
    if (!in.read(buf, static_cast<std::streamsize>(n))) throw PlyError("unexpected end of PLY data");
    switch (s) {
        case Scalar::i8: return load<std::int8_t>(buf, swap);
        case Scalar::u8: return load<std::uint8_t>(buf, swap);
        case Scalar::i16: return load<std::int16_t>(buf, swap);
        case Scalar::u16: return load<std::uint16_t>(buf, swap);
        case Scalar::i32: return load<std::int32_t>(buf, swap);
        case Scalar::u32: return load<std::uint32_t>(buf, swap);
        case Scalar::f32: return load<float>(buf, swap);
        case Scalar::f64: return load<double>(buf, swap);
    }
    return 0.0;
}

double read_ascii(std::istream& in) {
    double v;
    if (!(in >> v)) throw PlyError("malformed ascii PLY value");
    return v;
}

}  // namespace

bool PlyVertexTable::has(const std::string& name) const {
    return std::find(names.begin(), names.end(), name) != names.end();
}

const std::vector<double>& PlyVertexTable::column(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw PlyError("PLY vertex property '" + name + "' missing");
    return columns[static_cast<std::size_t>(it - names.begin())];
}

PlyVertexTable read_ply_vertices(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PlyError("cannot open PLY file " + path.string());

    std::string line;
    std::getline(in, line);
    if (line.rfind("ply", 0) != 0) throw PlyError("not a PLY file: " + path.string());

    Format format = Format::ascii;
    std::vector<Element> elements;
    bool header_done = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "format") {
            std::string f;
            ls >> f;
            if (f == "ascii") format = Format::ascii;
            else if (f == "binary_little_endian") format = Format::binary_le;
            else if (f == "binary_big_endian") format = Format::binary_be;
            else throw PlyError("unsupported PLY format '" + f + "'");
        } else if (word == "element") {
            Element e;
            ls >> e.name >> e.count;
            elements.push_back(e);
        } else if (word == "property") {
            if (elements.empty()) throw PlyError("PLY property before element");
            Property p;
            std::string t;
            ls >> t;
            if (t == "list") {
                std::string ct, it;
                ls >> ct >> it >> p.name;
                p.is_list = true;
                p.count_type = parse_scalar(ct);
                p.type = parse_scalar(it);
            } else {
                p.type = parse_scalar(t);
                ls >> p.name;
            }
            elements.back().properties.push_back(p);
        } else if (word == "end_header") {
            header_done = true;
            break;
        }
    }
    if (!header_done) throw PlyError("PLY header not terminated");

    const bool host_le = std::endian::native == std::endian::little;
    const bool swap = (format == Format::binary_le) != host_le;

    PlyVertexTable table;
    for (const auto& e : elements) {
        const bool is_vertex = e.name == "vertex";
        std::vector<std::size_t> column_of(e.properties.size(), SIZE_MAX);
        if (is_vertex) {
            for (std::size_t i = 0; i < e.properties.size(); ++i) {
                if (e.properties[i].is_list) continue;
                column_of[i] = table.names.size();
                table.names.push_back(e.properties[i].name);
                table.columns.emplace_back();
                table.columns.back().reserve(e.count);
            }
            table.rows = e.count;
        }
        for (std::size_t row = 0; row < e.count; ++row) {
            for (std::size_t i = 0; i < e.properties.size(); ++i) {
                const auto& p = e.properties[i];
                if (p.is_list) {
                    const double n = format == Format::ascii ? read_ascii(in)
                                                             : read_binary(in, p.count_type, swap);
                    for (long k = 0; k < static_cast<long>(n); ++k) {
                        if (format == Format::ascii) read_ascii(in);
                        else read_binary(in, p.type, swap);
                    }
                    continue;
                }
                const double v = format == Format::ascii ? read_ascii(in) : read_binary(in, p.type, swap);
                if (column_of[i] != SIZE_MAX) table.columns[column_of[i]].push_back(v);
            }
        }
        if (is_vertex) break;
    }
    return table;
}

PointCloud read_ply_points(const std::filesystem::path& path) {
    const auto table = read_ply_vertices(path);
    const auto& x = table.column("x");
    const auto& y = table.column("y");
    const auto& z = table.column("z");
    PointCloud cloud;
    cloud.positions.reserve(table.rows);
    for (std::size_t i = 0; i < table.rows; ++i) {
        Vec3 p{x[i], y[i], z[i]};
        if (!p.allFinite()) throw PlyError("PLY vertex " + std::to_string(i) + " is not finite");
        cloud.positions.push_back(p);
    }
    return cloud;
}

void write_ply_vertices(const std::filesystem::path& path, const std::vector<std::string>& names,
                        const std::vector<std::vector<double>>& columns) {
    if (names.size() != columns.size()) throw PlyError("PLY writer: names/columns mismatch");
    const std::size_t rows = columns.empty() ? 0 : columns.front().size();
    for (const auto& c : columns) {
        if (c.size() != rows) throw PlyError("PLY writer: ragged columns");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw PlyError("cannot write PLY file " + path.string());
    out << "ply\nformat binary_little_endian 1.0\nelement vertex " << rows << "\n";
    for (const auto& n : names) out << "property double " << n << "\n";
    out << "end_header\n";
    for (std::size_t r = 0; r < rows; ++r) {
        for (const auto& c : columns) {
            double v = c[r];
            if constexpr (std::endian::native != std::endian::little) {
                char tmp[8];
                std::memcpy(tmp, &v, 8);
                std::reverse(tmp, tmp + 8);
                std::memcpy(&v, tmp, 8);
            }
            out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
    }
    if (!out) throw PlyError("failed writing PLY file " + path.string());
}

}  // namespace gsd
