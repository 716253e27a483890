#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "svct/volume.hpp"

namespace svct {

// Container layout: 8-byte magic, u32 version, u32 header length, a
// "key=value" text header, then little-endian float32 values.
inline constexpr char kVolumeMagic[8] = {'S', 'V', 'C', 'T', 'V', 'O', 'L', '\0'};
inline constexpr char kSinogramMagic[8] = {'S', 'V', 'C', 'T', 'S', 'I', 'N', '\0'};
inline constexpr std::uint32_t kFormatVersion = 1;

struct RawContainer {
    std::string header;
    std::vector<float> payload;
};

void write_container(const std::filesystem::path& path, const char (&magic)[8], const std::string& header,
                     const std::vector<float>& payload);

RawContainer read_container(const std::filesystem::path& path, const char (&magic)[8]);

void save_volume(const std::filesystem::path& path, const Volume3D& volume);
Volume3D load_volume(const std::filesystem::path& path);

/// The sinogram header carries its geometry (keys prefixed "geometry.") and
/// the view angles in radians.
void save_sinogram(const std::filesystem::path& path, const Sinogram& sinogram);
Sinogram load_sinogram(const std::filesystem::path& path);

/// Headerless little-endian float32 volume, x fastest.
Volume3D load_raw_volume(const std::filesystem::path& path, Dims3 dims, double voxel);

}  // namespace svct
