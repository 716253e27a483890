#pragma once

#include <map>
#include <utility>
#include <vector>

#include "svct/volume.hpp"

namespace svct {

/// A thin slab of a volume: `depth` consecutive slices of a centred
/// spatial crop, stored [z][y][x] with x fastest.
struct Subvolume {
    int nx = 0;
    int ny = 0;
    int depth = 0;
    int z_center = 0;  // parent slice produced from this subvolume
    std::vector<float> data;

    const float* slice(int local_z) const { return data.data() + static_cast<std::size_t>(local_z) * nx * ny; }
};

/// Local index of the central slice: depth / 2 (the 5th of 8 for depth 8).
inline int central_index(int depth) { return depth / 2; }

/// Inclusive range of valid centres [depth/2, nz - depth/2 - 1]: the same
/// depth/2 margin is left empty at both ends of the volume.
std::pair<int, int> valid_center_range(int nz, int depth);

/// One subvolume per valid centre, z-stride 1, in increasing z. The window
/// for centre z covers slices [z - depth/2, z - depth/2 + depth - 1].
std::vector<Subvolume> extract_subvolumes(const Volume3D& volume, int depth, int spatial_crop);

Image2D central_slice(const Subvolume& sub);

/// Builds a volume from per-centre slices. Slices must cover exactly the
/// valid-centre range for `depth`; slices outside it are zero. Each output
/// slice is copied from exactly one input, never averaged.
Volume3D aggregate_slices(const std::map<int, Image2D>& slices, int nz, int depth, double voxel);

}  // namespace svct
