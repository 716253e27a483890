#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "svct/geometry.hpp"

namespace svct {

struct Dims3 {
    int nx = 0;
    int ny = 0;
    int nz = 0;

    std::size_t count() const { return static_cast<std::size_t>(nx) * ny * nz; }
    bool operator==(const Dims3&) const = default;
};

/// Attenuation (per mm) on a regular voxel grid centred on the isocenter.
/// Storage is single precision, x fastest, then y, then z.
class Volume3D {
public:
    Volume3D() = default;
    Volume3D(Dims3 dims, double voxel);
    Volume3D(Dims3 dims, double voxel, std::vector<float> data);

    /// Zero volume matching the geometry's grid.
    static Volume3D zeros(const ConeBeamGeometry& geometry);

    const Dims3& dims() const { return dims_; }
    double voxel() const { return voxel_; }
    std::size_t size() const { return data_.size(); }

    std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) + static_cast<std::size_t>(dims_.nx) * (y + static_cast<std::size_t>(dims_.ny) * z);
    }
    float& operator()(int x, int y, int z) { return data_[index(x, y, z)]; }
    float operator()(int x, int y, int z) const { return data_[index(x, y, z)]; }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }
    std::vector<float>& values() { return data_; }
    const std::vector<float>& values() const { return data_; }

    /// Pointer to the first voxel of slice z.
    const float* slice_data(int z) const { return data_.data() + index(0, 0, z); }
    float* slice_data(int z) { return data_.data() + index(0, 0, z); }

    bool matches(const ConeBeamGeometry& geometry) const;

private:
    Dims3 dims_;
    double voxel_ = 1.0;
    std::vector<float> data_;
};

/// Single-precision 2D image, x fastest.
struct Image2D {
    int nx = 0;
    int ny = 0;
    std::vector<float> data;

    Image2D() = default;
    Image2D(int nx_, int ny_) : nx(nx_), ny(ny_), data(static_cast<std::size_t>(nx_) * ny_, 0.0f) {}

    float& operator()(int x, int y) { return data[static_cast<std::size_t>(y) * nx + x]; }
    float operator()(int x, int y) const { return data[static_cast<std::size_t>(y) * nx + x]; }
};

/// Projections for every view, [view][row][col] with col fastest. Values are
/// line integrals (attenuation x mm). Carries the acquisition it came from.
class Sinogram {
public:
    Sinogram(ConeBeamGeometry geometry, ViewSet views);
    Sinogram(ConeBeamGeometry geometry, ViewSet views, std::vector<float> data);

    const ConeBeamGeometry& geometry() const { return geometry_; }
    const ViewSet& views() const { return views_; }
    int n_views() const { return static_cast<int>(views_.size()); }
    std::size_t size() const { return data_.size(); }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }
    std::vector<float>& values() { return data_; }
    const std::vector<float>& values() const { return data_; }

    std::span<const float> view(int v) const;

private:
    ConeBeamGeometry geometry_;
    ViewSet views_;
    std::vector<float> data_;
};

std::vector<double> to_double(std::span<const float> values);
std::vector<float> to_float(std::span<const double> values);

/// Throws ShapeError unless every value is finite.
void require_finite(std::span<const float> values, const char* what);

}  // namespace svct
