#include "svct/file_format.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "svct/error.hpp"
#include "svct/text_config.hpp"

namespace svct {

namespace {

std::uint32_t to_le(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        v = ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
    }
    return v;
}

void swap_payload(std::vector<float>& values) {
    if constexpr (std::endian::native == std::endian::big) {
        for (float& f : values) f = std::bit_cast<float>(to_le(std::bit_cast<std::uint32_t>(f)));
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::uint32_t read_u32(const std::string& bytes, std::size_t offset) {
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + offset, 4);
    return to_le(v);
}

std::string magic_text(const char (&magic)[8]) { return std::string(magic, strnlen(magic, 8)); }

}  // namespace

void write_container(const std::filesystem::path& path, const char (&magic)[8], const std::string& header,
                     const std::vector<float>& payload) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(magic, 8);
    const std::uint32_t version = to_le(kFormatVersion);
    const std::uint32_t len = to_le(static_cast<std::uint32_t>(header.size()));
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    std::vector<float> le = payload;
    swap_payload(le);
    out.write(reinterpret_cast<const char*>(le.data()), static_cast<std::streamsize>(le.size() * sizeof(float)));
    if (!out) throw FormatError("write failed for " + path.string());
}

RawContainer read_container(const std::filesystem::path& path, const char (&magic)[8]) {
    const std::string bytes = read_file(path);
    if (bytes.size() < 16) throw FormatError(path.string() + ": truncated header");
    if (std::memcmp(bytes.data(), magic, 8) != 0) {
        throw FormatError(path.string() + ": bad magic, expected " + magic_text(magic));
    }
    const std::uint32_t version = read_u32(bytes, 8);
    if (version != kFormatVersion) throw FormatError(path.string() + ": unknown version " + std::to_string(version));
    const std::uint32_t len = read_u32(bytes, 12);
    if (bytes.size() < 16 + static_cast<std::size_t>(len)) throw FormatError(path.string() + ": truncated text header");
    RawContainer c;
    c.header = bytes.substr(16, len);
    const std::size_t payload_bytes = bytes.size() - 16 - len;
    if (payload_bytes % sizeof(float) != 0) throw FormatError(path.string() + ": payload is not whole float32 values");
    c.payload.resize(payload_bytes / sizeof(float));
    std::memcpy(c.payload.data(), bytes.data() + 16 + len, payload_bytes);
    swap_payload(c.payload);
    return c;
}

void save_volume(const std::filesystem::path& path, const Volume3D& volume) {
    std::string h;
    h += "nx=" + std::to_string(volume.dims().nx) + '\n';
    h += "ny=" + std::to_string(volume.dims().ny) + '\n';
    h += "nz=" + std::to_string(volume.dims().nz) + '\n';
    h += "voxel=" + format_double(volume.voxel()) + '\n';
    h += "units=1/mm\n";
    write_container(path, kVolumeMagic, h, volume.values());
}

Volume3D load_volume(const std::filesystem::path& path) {
    auto c = read_container(path, kVolumeMagic);
    const auto kv = parse_key_values(c.header);
    Dims3 d{parse_int("nx", require_value(kv, "nx")), parse_int("ny", require_value(kv, "ny")),
            parse_int("nz", require_value(kv, "nz"))};
    const double voxel = parse_double("voxel", require_value(kv, "voxel"));
    if (d.nx < 1 || d.ny < 1 || d.nz < 1) throw FormatError(path.string() + ": dims must be >= 1");
    if (!(voxel > 0)) throw FormatError(path.string() + ": voxel must be > 0");
    if (c.payload.size() != d.count()) {
        throw FormatError(path.string() + ": payload has " + std::to_string(c.payload.size()) +
                          " values, header dims need " + std::to_string(d.count()));
    }
    return Volume3D(d, voxel, std::move(c.payload));
}

void save_sinogram(const std::filesystem::path& path, const Sinogram& sinogram) {
    std::string h;
    for (const auto& [k, v] : parse_key_values(sinogram.geometry().to_config())) h += "geometry." + k + '=' + v + '\n';
    h += "views=" + std::to_string(sinogram.n_views()) + '\n';
    h += "angles=" + join_doubles(sinogram.views().angles) + '\n';
    h += "units=line integral\n";
    write_container(path, kSinogramMagic, h, sinogram.values());
}

Sinogram load_sinogram(const std::filesystem::path& path) {
    auto c = read_container(path, kSinogramMagic);
    const auto kv = parse_key_values(c.header);
    std::string geom_text;
    for (const auto& [k, v] : kv) {
        if (k.rfind("geometry.", 0) == 0) geom_text += k.substr(9) + '=' + v + '\n';
    }
    const ConeBeamGeometry geometry = ConeBeamGeometry::parse(geom_text);
    const int n_views = parse_int("views", require_value(kv, "views"));
    ViewSet views{parse_double_list("angles", require_value(kv, "angles"))};
    if (n_views < 1 || static_cast<int>(views.size()) != n_views) {
        throw FormatError(path.string() + ": angles count does not match views");
    }
    const std::size_t expected = static_cast<std::size_t>(n_views) * geometry.detector_size();
    if (c.payload.size() != expected) {
        throw FormatError(path.string() + ": payload has " + std::to_string(c.payload.size()) +
                          " values, header needs " + std::to_string(expected));
    }
    return Sinogram(geometry, std::move(views), std::move(c.payload));
}

Volume3D load_raw_volume(const std::filesystem::path& path, Dims3 dims, double voxel) {
    const std::string bytes = read_file(path);
    if (bytes.size() != dims.count() * sizeof(float)) {
        throw FormatError(path.string() + ": raw size does not match dims");
    }
    std::vector<float> v(dims.count());
    std::memcpy(v.data(), bytes.data(), bytes.size());
    swap_payload(v);
    return Volume3D(dims, voxel, std::move(v));
}

}  // namespace svct
