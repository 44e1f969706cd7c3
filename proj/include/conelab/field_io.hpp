#pragma once

// Field snapshots: one record is
//   4 bytes  magic "CLFD"
//   4 bytes  header length L (uint32, little endian)
//   L bytes  JSON header (UTF-8)
//   8*count  node values as IEEE-754 float64, little endian, in grid index order
// The header carries the full grid description (radial node lists included),
// so a record reconstructs its grid bit for bit. A space-time field is a
// sequence of records whose headers add "time_index" and "time".

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "conelab/grid.hpp"

namespace conelab {

namespace io_detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>((v >> (8 * k)) & 0xFFu);
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    require(static_cast<bool>(is), "field_io: truncated record");
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(b[k]) << (8 * k);
    return v;
}

inline void put_f64(std::ostream& os, const std::vector<double>& values) {
    std::vector<unsigned char> buf(values.size() * 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto bits = std::bit_cast<std::uint64_t>(values[i]);
        for (int k = 0; k < 8; ++k) buf[8 * i + k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xFFu);
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

inline std::vector<double> get_f64(std::istream& is, std::size_t count) {
    std::vector<unsigned char> buf(count * 8);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    require(static_cast<bool>(is), "field_io: truncated value block");
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t bits = 0;
        for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(buf[8 * i + k]) << (8 * k);
        out[i] = std::bit_cast<double>(bits);
    }
    return out;
}

} // namespace io_detail

inline nlohmann::json grid_header(const Grid& g) {
    nlohmann::json h;
    h["format"] = "conelab-field";
    h["version"] = 1;
    h["dtype"] = "float64-le";
    h["p"] = g.p();
    h["ambient_tangential"] = g.ambient_tangential();
    h["count"] = g.size();
    std::vector<double> betas;
    for (const auto& f : g.factors()) {
        betas.push_back(f.beta);
        h["factors"].push_back({{"beta", f.beta},
                                {"radial_intervals", f.radial_intervals},
                                {"angular_nodes", f.angular_nodes},
                                {"radius", f.radius},
                                {"grading", f.grading},
                                {"r", f.r}});
    }
    h["betas"] = betas;
    h["tangential"] = nlohmann::json::array();
    for (const auto& t : g.tangentials())
        h["tangential"].push_back({{"nodes", t.nodes}, {"lo", t.lo}, {"hi", t.hi}, {"periodic", t.periodic}});
    return h;
}

inline std::shared_ptr<const Grid> grid_from_header(const nlohmann::json& h) {
    require(h.value("format", "") == "conelab-field" && h.value("version", 0) == 1, "field_io: unknown record format");
    std::vector<FactorAxis> factors;
    for (const auto& jf : h.at("factors")) {
        FactorAxis f;
        f.beta = jf.at("beta");
        f.radial_intervals = jf.at("radial_intervals");
        f.angular_nodes = jf.at("angular_nodes");
        f.radius = jf.at("radius");
        f.grading = jf.at("grading");
        f.r = jf.at("r").get<std::vector<double>>();
        require(static_cast<int>(f.r.size()) == f.radial_intervals + 1, "field_io: radial node list has the wrong length");
        factors.push_back(std::move(f));
    }
    std::vector<TangentialAxis> tan;
    for (const auto& jt : h.at("tangential")) tan.push_back({jt.at("nodes"), jt.at("lo"), jt.at("hi"), jt.at("periodic")});
    return std::make_shared<const Grid>(std::move(factors), std::move(tan), h.at("ambient_tangential").get<int>());
}

inline void write_field(std::ostream& os, const GridFunction& u, const nlohmann::json& extra = {}) {
    nlohmann::json h = grid_header(u.grid());
    if (extra.is_object())
        for (const auto& [k, v] : extra.items()) h[k] = v;
    const std::string text = h.dump();
    os.write("CLFD", 4);
    io_detail::put_u32(os, static_cast<std::uint32_t>(text.size()));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    io_detail::put_f64(os, u.values());
    require(static_cast<bool>(os), "field_io: write failed");
}

struct FieldRecord {
    GridFunction field;
    nlohmann::json header;
};

/// Reads one record; the grid is shared with `reuse` when the headers describe the same grid.
inline FieldRecord read_field(std::istream& is, const std::shared_ptr<const Grid>& reuse = nullptr) {
    char magic[4];
    is.read(magic, 4);
    require(static_cast<bool>(is) && std::memcmp(magic, "CLFD", 4) == 0, "field_io: bad magic");
    const std::uint32_t len = io_detail::get_u32(is);
    std::string text(len, '\0');
    is.read(text.data(), len);
    require(static_cast<bool>(is), "field_io: truncated header");
    auto h = nlohmann::json::parse(text);
    std::shared_ptr<const Grid> grid;
    if (reuse && grid_header(*reuse)["factors"] == h["factors"] && grid_header(*reuse)["tangential"] == h["tangential"])
        grid = reuse;
    else
        grid = grid_from_header(h);
    const auto count = h.at("count").get<std::size_t>();
    require(count == grid->size(), "field_io: count does not match the grid");
    return {GridFunction(grid, io_detail::get_f64(is, count)), std::move(h)};
}

inline void save_field(const std::string& path, const GridFunction& u) {
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), "field_io: cannot open " + path);
    write_field(os, u);
}

inline GridFunction load_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), "field_io: cannot open " + path);
    return read_field(is).field;
}

inline void write_space_time(std::ostream& os, const SpaceTimeField& f) {
    for (std::size_t k = 0; k < f.level_count(); ++k)
        write_field(os, f.at(k), {{"time_index", k}, {"time", f.times[k]}, {"levels", f.level_count()}});
}

inline SpaceTimeField read_space_time(std::istream& is) {
    SpaceTimeField out;
    while (is.peek() != std::char_traits<char>::eof()) {
        auto rec = read_field(is, out.grid);
        require(rec.header.at("time_index").get<std::size_t>() == out.level_count(), "field_io: time levels out of order");
        if (!out.grid) out.grid = rec.field.grid_ptr();
        out.push(rec.header.at("time").get<double>(), std::move(rec.field.values()));
    }
    return out;
}

inline void save_space_time(const std::string& path, const SpaceTimeField& f) {
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), "field_io: cannot open " + path);
    write_space_time(os, f);
}

inline SpaceTimeField load_space_time(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), "field_io: cannot open " + path);
    return read_space_time(is);
}

} // namespace conelab
