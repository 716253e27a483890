#include "svct/patching.hpp"

#include <algorithm>
#include <string>

#include "svct/error.hpp"

namespace svct {

std::pair<int, int> valid_center_range(int nz, int depth) {
    if (depth < 1) throw ShapeError("patching: depth must be >= 1");
    if (depth > nz) {
        throw ShapeError("patching: depth " + std::to_string(depth) + " exceeds nz " + std::to_string(nz));
    }
    const int half = depth / 2;
    const int first = half;
    const int last = nz - half - 1;
    if (last < first) throw ShapeError("patching: no valid subvolume centre");
    return {first, last};
}

std::vector<Subvolume> extract_subvolumes(const Volume3D& volume, int depth, int spatial_crop) {
    const Dims3 d = volume.dims();
    const auto [first, last] = valid_center_range(d.nz, depth);
    if (spatial_crop < 1 || spatial_crop > std::min(d.nx, d.ny)) {
        throw ShapeError("patching: spatial_crop must be in [1, min(nx, ny)]");
    }
    const int x0 = (d.nx - spatial_crop) / 2;
    const int y0 = (d.ny - spatial_crop) / 2;
    const std::size_t plane = static_cast<std::size_t>(spatial_crop) * spatial_crop;

    std::vector<Subvolume> out;
    out.reserve(last - first + 1);
    for (int zc = first; zc <= last; ++zc) {
        Subvolume sub;
        sub.nx = sub.ny = spatial_crop;
        sub.depth = depth;
        sub.z_center = zc;
        sub.data.resize(plane * depth);
        const int z_begin = zc - depth / 2;
        for (int k = 0; k < depth; ++k) {
            float* dst = sub.data.data() + plane * k;
            for (int y = 0; y < spatial_crop; ++y) {
                const float* src = &volume.values()[volume.index(x0, y0 + y, z_begin + k)];
                std::copy(src, src + spatial_crop, dst + static_cast<std::size_t>(y) * spatial_crop);
            }
        }
        out.push_back(std::move(sub));
    }
    return out;
}

Image2D central_slice(const Subvolume& sub) {
    if (sub.depth < 1 || sub.data.size() != static_cast<std::size_t>(sub.nx) * sub.ny * sub.depth) {
        throw ShapeError("central_slice: malformed subvolume");
    }
    Image2D out(sub.nx, sub.ny);
    const float* src = sub.slice(central_index(sub.depth));
    std::copy(src, src + out.data.size(), out.data.begin());
    return out;
}

Volume3D aggregate_slices(const std::map<int, Image2D>& slices, int nz, int depth, double voxel) {
    const auto [first, last] = valid_center_range(nz, depth);
    if (slices.empty()) throw ShapeError("aggregate_slices: no slices");
    const int nx = slices.begin()->second.nx;
    const int ny = slices.begin()->second.ny;
    for (int z = first; z <= last; ++z) {
        if (!slices.contains(z)) throw ShapeError("aggregate_slices: missing slice " + std::to_string(z));
    }
    Volume3D out({nx, ny, nz}, voxel);
    for (const auto& [z, img] : slices) {
        if (z < first || z > last) {
            throw ShapeError("aggregate_slices: slice " + std::to_string(z) + " outside valid centre range");
        }
        if (img.nx != nx || img.ny != ny) throw ShapeError("aggregate_slices: inconsistent slice shape");
        std::copy(img.data.begin(), img.data.end(), out.slice_data(z));
    }
    return out;
}

}  // namespace svct
