#pragma once

#include <cstdint>
#include <vector>

#include "svct/volume.hpp"

namespace svct {

/// Binary mask on a volume grid (1 = inside).
struct Mask3D {
    Dims3 dims;
    std::vector<std::uint8_t> data;

    std::size_t count() const;
    bool at(int x, int y, int z) const {
        return data[static_cast<std::size_t>(x) + static_cast<std::size_t>(dims.nx) * (y + static_cast<std::size_t>(dims.ny) * z)] != 0;
    }
};

/// Otsu threshold over a 256-bin histogram of the volume's values.
double otsu_threshold(const Volume3D& volume);

/// Otsu segmentation, enclosed holes filled (everything not 6-connected to
/// the grid border through background counts as inside), then dilation by a
/// Euclidean ball of `dilation_radius` voxels. Throws on a constant volume.
Mask3D make_mask(const Volume3D& gt, int dilation_radius = 3);

/// ||M (gt - x)||_1 / ||M gt||_1.
double nmae(const Volume3D& gt, const Volume3D& x, const Mask3D& mask);

/// size x size Laplacian of Gaussian scaled by sigma^2, then shifted to zero
/// sum. Row-major, centre at (size/2, size/2).
std::vector<double> log_kernel(int size, double sigma);

struct NhfenReport {
    double value = 0.0;
    /// Per z slice ratio, or a negative number when the slice was skipped.
    std::vector<double> per_slice;
    int slices_used = 0;
};

/// Mean over z slices of ||H(M gt) - H(M x)||_2 / ||H(M gt)||_2 with H the
/// 15x15, sigma 1.5 LoG applied as a same-size zero-padded correlation.
/// Slices whose denominator is below 1e-9 * max|gt| are skipped.
NhfenReport nhfen_report(const Volume3D& gt, const Volume3D& x, const Mask3D& mask);
double nhfen(const Volume3D& gt, const Volume3D& x, const Mask3D& mask);

inline constexpr int kLogSize = 15;
inline constexpr double kLogSigma = 1.5;

}  // namespace svct
