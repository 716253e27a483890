#include "svct/projector.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "svct/error.hpp"

namespace svct {

namespace {

constexpr int kMaxTaps = 16;

}  // namespace

struct ConeBeamProjector::Footprint {
    double amplitude = 0.0;
    int u0 = 0;
    int nu = 0;
    int v0 = 0;
    int nv = 0;
    std::array<double, kMaxTaps> wu{};
    std::array<double, kMaxTaps> wv{};
};

namespace {

// Fractions of pixels [k, k+1) covered by [lo, hi), in detector-pixel units.
int covered_pixels(double lo, double hi, int n, int& first, std::array<double, kMaxTaps>& w) {
    const int k0 = std::max(0, static_cast<int>(std::floor(lo)));
    const int k1 = std::min(n - 1, static_cast<int>(std::ceil(hi)) - 1);
    first = k0;
    int count = 0;
    for (int k = k0; k <= k1; ++k) {
        const double ov = std::min(hi, k + 1.0) - std::max(lo, static_cast<double>(k));
        w[count++] = ov > 0.0 ? ov : 0.0;
    }
    return count;
}

}  // namespace

ConeBeamProjector::ConeBeamProjector(const ConeBeamGeometry& geometry, const ViewSet& views)
    : geometry_(geometry), views_(views) {
    if (views.size() == 0) throw ShapeError("projector needs at least one view");
    cos_.reserve(views.size());
    sin_.reserve(views.size());
    for (double a : views.angles) {
        cos_.push_back(std::cos(a));
        sin_.push_back(std::sin(a));
    }
    // Closest voxel to the source sets the widest shadow.
    const double half_diag = 0.5 * geometry.voxel() *
                             std::sqrt(double(geometry.vol_nx()) * geometry.vol_nx() +
                                       double(geometry.vol_ny()) * geometry.vol_ny());
    if (half_diag >= geometry.dso()) throw ShapeError("volume reaches the source orbit");
    const double widest = geometry.voxel() * geometry.dsd() / (geometry.dso() - half_diag) / geometry.det_pixel();
    if (widest + 2.0 > kMaxTaps) throw ShapeError("voxel shadow spans too many detector pixels");
}

void ConeBeamProjector::footprint(int view, int ix, int iy, int iz, Footprint& fp) const {
    const auto& g = geometry_;
    const double px = (ix - 0.5 * (g.vol_nx() - 1)) * g.voxel();
    const double py = (iy - 0.5 * (g.vol_ny() - 1)) * g.voxel();
    const double pz = (iz - 0.5 * (g.vol_nz() - 1)) * g.voxel();
    const double c = cos_[view];
    const double s = sin_[view];

    const double along = px * c + py * s;    // toward the source
    const double across = -px * s + py * c;  // detector u direction
    const double depth = g.dso() - along;    // source-to-voxel distance along the central ray
    const double mag = g.dsd() / depth;

    // Source-to-voxel ray in world coordinates.
    const double dx = px - g.dso() * c;
    const double dy = py - g.dso() * s;
    const double dz = pz;
    const double r_xy = std::sqrt(dx * dx + dy * dy);
    const double r = std::sqrt(r_xy * r_xy + dz * dz);
    const double m_xy = std::max(std::abs(dx), std::abs(dy)) / r_xy;
    const double m = std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) / r;

    fp.amplitude = g.voxel() / m;

    const double inv_pitch = 1.0 / g.det_pixel();
    const double u = mag * across * inv_pitch + 0.5 * g.det_cols();
    const double v = mag * pz * inv_pitch + 0.5 * g.det_rows();
    const double half_u = 0.5 * g.voxel() * mag * m_xy * inv_pitch;
    const double half_v = 0.5 * g.voxel() * mag * inv_pitch;
    fp.nu = covered_pixels(u - half_u, u + half_u, g.det_cols(), fp.u0, fp.wu);
    fp.nv = covered_pixels(v - half_v, v + half_v, g.det_rows(), fp.v0, fp.wv);
}

void ConeBeamProjector::forward(std::span<const double> volume, std::span<double> sino) const {
    if (volume.size() != volume_size()) throw ShapeError("forward_project: volume size does not match geometry");
    if (sino.size() != sinogram_size()) throw ShapeError("forward_project: sinogram size does not match geometry");
    const auto& g = geometry_;
    const int n_views = static_cast<int>(views_.size());
    const std::size_t det = g.detector_size();
    const int cols = g.det_cols();

#pragma omp parallel for schedule(static)
    for (int view = 0; view < n_views; ++view) {
        double* out = sino.data() + static_cast<std::size_t>(view) * det;
        std::fill(out, out + det, 0.0);
        Footprint fp;
        std::size_t idx = 0;
        for (int iz = 0; iz < g.vol_nz(); ++iz) {
            for (int iy = 0; iy < g.vol_ny(); ++iy) {
                for (int ix = 0; ix < g.vol_nx(); ++ix, ++idx) {
                    const double val = volume[idx];
                    if (val == 0.0) continue;
                    footprint(view, ix, iy, iz, fp);
                    const double a = val * fp.amplitude;
                    for (int j = 0; j < fp.nv; ++j) {
                        double* row = out + static_cast<std::size_t>(fp.v0 + j) * cols + fp.u0;
                        const double av = a * fp.wv[j];
                        for (int i = 0; i < fp.nu; ++i) row[i] += av * fp.wu[i];
                    }
                }
            }
        }
    }
}

void ConeBeamProjector::back(std::span<const double> sino, std::span<double> volume) const {
    if (volume.size() != volume_size()) throw ShapeError("back_project: volume size does not match geometry");
    if (sino.size() != sinogram_size()) throw ShapeError("back_project: sinogram size does not match geometry");
    const auto& g = geometry_;
    const int n_views = static_cast<int>(views_.size());
    const std::size_t det = g.detector_size();
    const int cols = g.det_cols();
    const std::size_t plane = static_cast<std::size_t>(g.vol_nx()) * g.vol_ny();

#pragma omp parallel for schedule(static)
    for (int iz = 0; iz < g.vol_nz(); ++iz) {
        Footprint fp;
        std::size_t idx = plane * iz;
        for (int iy = 0; iy < g.vol_ny(); ++iy) {
            for (int ix = 0; ix < g.vol_nx(); ++ix, ++idx) {
                double acc = 0.0;
                for (int view = 0; view < n_views; ++view) {
                    footprint(view, ix, iy, iz, fp);
                    const double* in = sino.data() + static_cast<std::size_t>(view) * det;
                    double view_acc = 0.0;
                    for (int j = 0; j < fp.nv; ++j) {
                        const double* row = in + static_cast<std::size_t>(fp.v0 + j) * cols + fp.u0;
                        double row_acc = 0.0;
                        for (int i = 0; i < fp.nu; ++i) row_acc += fp.wu[i] * row[i];
                        view_acc += fp.wv[j] * row_acc;
                    }
                    acc += fp.amplitude * view_acc;
                }
                volume[idx] = acc;
            }
        }
    }
}

std::vector<double> ConeBeamProjector::forward(std::span<const double> volume) const {
    std::vector<double> out(sinogram_size());
    forward(volume, out);
    return out;
}

std::vector<double> ConeBeamProjector::back(std::span<const double> sino) const {
    std::vector<double> out(volume_size());
    back(sino, out);
    return out;
}

Sinogram forward_project(const Volume3D& volume, const ConeBeamGeometry& geometry, const ViewSet& views) {
    if (!volume.matches(geometry)) throw ShapeError("forward_project: volume dims do not match geometry");
    const ConeBeamProjector proj(geometry, views);
    const auto x = to_double(volume.data());
    return Sinogram(geometry, views, to_float(proj.forward(x)));
}

Volume3D back_project(const Sinogram& sinogram) {
    const ConeBeamProjector proj(sinogram.geometry(), sinogram.views());
    const auto y = to_double(sinogram.data());
    const auto& g = sinogram.geometry();
    return Volume3D({g.vol_nx(), g.vol_ny(), g.vol_nz()}, g.voxel(), to_float(proj.back(y)));
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("dot: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double dot(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw ShapeError("dot: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
    return acc;
}

}  // namespace svct
