#pragma once

#include <span>
#include <vector>

#include "svct/geometry.hpp"
#include "svct/volume.hpp"

namespace svct {

/// Voxel-driven separable-footprint cone-beam projector.
///
/// Each voxel is projected through its centre; its shadow on the detector is
/// modelled as a rectangle, separable in u (transaxial) and v (axial). The
/// rectangle's height is the ray length through the voxel, voxel / m where m
/// is the largest direction cosine of the source-to-voxel ray, and its
/// transaxial width is voxel * M * m_xy (M the voxel's magnification, m_xy the
/// largest in-plane direction cosine), which keeps the shadow's area equal to
/// that of the true trapezoid. A detector pixel receives the pixel-averaged
/// shadow: height times the fraction of the pixel covered in u and in v.
///
/// back() gathers with exactly the weights forward() scatters, so the pair is
/// adjoint up to floating-point summation order.
class ConeBeamProjector {
public:
    ConeBeamProjector(const ConeBeamGeometry& geometry, const ViewSet& views);

    const ConeBeamGeometry& geometry() const { return geometry_; }
    const ViewSet& views() const { return views_; }
    std::size_t volume_size() const { return geometry_.volume_size(); }
    std::size_t sinogram_size() const { return geometry_.detector_size() * views_.size(); }

    /// sino = A * volume (sino is overwritten).
    void forward(std::span<const double> volume, std::span<double> sino) const;
    /// volume = A^T * sino (volume is overwritten).
    void back(std::span<const double> sino, std::span<double> volume) const;

    std::vector<double> forward(std::span<const double> volume) const;
    std::vector<double> back(std::span<const double> sino) const;

private:
    struct Footprint;
    void footprint(int view, int ix, int iy, int iz, Footprint& fp) const;

    ConeBeamGeometry geometry_;
    ViewSet views_;
    std::vector<double> cos_;
    std::vector<double> sin_;
};

Sinogram forward_project(const Volume3D& volume, const ConeBeamGeometry& geometry, const ViewSet& views);
Volume3D back_project(const Sinogram& sinogram);

/// Inner product accumulated in double.
double dot(std::span<const double> a, std::span<const double> b);
double dot(std::span<const float> a, std::span<const float> b);

}  // namespace svct
