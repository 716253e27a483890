#include "svct/volume.hpp"

#include <cmath>
#include <string>

#include "svct/error.hpp"

namespace svct {

Volume3D::Volume3D(Dims3 dims, double voxel) : Volume3D(dims, voxel, std::vector<float>(dims.count(), 0.0f)) {}

Volume3D::Volume3D(Dims3 dims, double voxel, std::vector<float> data)
    : dims_(dims), voxel_(voxel), data_(std::move(data)) {
    if (dims.nx < 1 || dims.ny < 1 || dims.nz < 1) throw ShapeError("volume dims must be >= 1");
    if (!(voxel > 0) || !std::isfinite(voxel)) throw ShapeError("volume voxel pitch must be > 0");
    if (data_.size() != dims.count()) {
        throw ShapeError("volume payload has " + std::to_string(data_.size()) + " values, dims need " +
                         std::to_string(dims.count()));
    }
}

Volume3D Volume3D::zeros(const ConeBeamGeometry& geometry) {
    return Volume3D({geometry.vol_nx(), geometry.vol_ny(), geometry.vol_nz()}, geometry.voxel());
}

bool Volume3D::matches(const ConeBeamGeometry& geometry) const {
    return dims_ == Dims3{geometry.vol_nx(), geometry.vol_ny(), geometry.vol_nz()} &&
           std::abs(voxel_ - geometry.voxel()) <= 1e-9 * geometry.voxel();
}

Sinogram::Sinogram(ConeBeamGeometry geometry, ViewSet views)
    : geometry_(std::move(geometry)), views_(std::move(views)) {
    data_.assign(views_.size() * geometry_.detector_size(), 0.0f);
}

Sinogram::Sinogram(ConeBeamGeometry geometry, ViewSet views, std::vector<float> data)
    : geometry_(std::move(geometry)), views_(std::move(views)), data_(std::move(data)) {
    if (views_.size() == 0) throw ShapeError("sinogram needs at least one view");
    if (data_.size() != views_.size() * geometry_.detector_size()) {
        throw ShapeError("sinogram payload has " + std::to_string(data_.size()) + " values, expected " +
                         std::to_string(views_.size() * geometry_.detector_size()));
    }
}

std::span<const float> Sinogram::view(int v) const {
    const std::size_t n = geometry_.detector_size();
    return std::span<const float>(data_).subspan(static_cast<std::size_t>(v) * n, n);
}

std::vector<double> to_double(std::span<const float> values) { return {values.begin(), values.end()}; }

std::vector<float> to_float(std::span<const double> values) {
    std::vector<float> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = static_cast<float>(values[i]);
    return out;
}

void require_finite(std::span<const float> values, const char* what) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw NumericError(std::string(what) + ": non-finite value at index " + std::to_string(i));
        }
    }
}

}  // namespace svct
