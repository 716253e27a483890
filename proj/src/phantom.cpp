#include "svct/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "svct/error.hpp"
#include "svct/projector.hpp"

namespace svct {

namespace {

struct Lobe {
    double cx, cy, cz;
    double ax, ay, az;  // semi-axes in the lobe frame
    double yaw;
    double value;
    double freq, phase1, phase2;
};

struct WalnutModel {
    double a, b, c;       // outer shell semi-axes (mm)
    double yaw;
    double thickness;     // shell thickness as a fraction of the radius
    double shell_value;
    double wrinkle_amp, wrinkle_k1, wrinkle_k2, wrinkle_phase;
    double septum_yaw, septum_half_width, septum_value;
    double gap_value;
    double gap_half_width;
    int lobes;
    std::vector<Lobe> lobe;

    double eval(double x, double y, double z) const {
        // Object frame.
        const double cy_ = std::cos(yaw), sy_ = std::sin(yaw);
        const double u = cy_ * x + sy_ * y;
        const double v = -sy_ * x + cy_ * y;
        const double w = z;

        const double theta = std::atan2(v / b, u / a);
        const double phi = std::atan2(w / c, std::hypot(u / a, v / b));
        const double wrinkle = 1.0 + wrinkle_amp * std::sin(wrinkle_k1 * theta + wrinkle_phase) *
                                         std::cos(wrinkle_k2 * phi);
        const double rho = std::sqrt((u / a) * (u / a) + (v / b) * (v / b) + (w / c) * (w / c)) / wrinkle;
        if (rho > 1.0) return 0.0;
        const double inner = 1.0 - thickness;
        if (rho >= inner) return shell_value;

        // Septum: a thin wall through the centre splitting the shell.
        const double sn = -std::sin(septum_yaw) * u + std::cos(septum_yaw) * v;
        if (std::abs(sn) < septum_half_width) return septum_value;

        // Cavity: lobes separated by low-attenuation gaps.
        double value = gap_value;
        for (const auto& l : lobe) {
            const double dx = u - l.cx, dy = v - l.cy, dz = w - l.cz;
            const double cl = std::cos(l.yaw), sl = std::sin(l.yaw);
            const double lx = cl * dx + sl * dy;
            const double ly = -sl * dx + cl * dy;
            const double q = (lx / l.ax) * (lx / l.ax) + (ly / l.ay) * (ly / l.ay) + (dz / l.az) * (dz / l.az);
            if (q >= 1.0) continue;
            // Keep a gap against the inner shell wall.
            if (rho > inner - gap_half_width) continue;
            const double ridge = std::sin(l.freq * lx + l.phase1) * std::sin(l.freq * 0.8 * dz + l.phase2);
            value = l.value * (1.0 + 0.3 * ridge);
            break;
        }
        return value;
    }
};

WalnutModel make_model(std::uint64_t seed, const ConeBeamGeometry& g) {
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL);
    auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

    const double half_xy = 0.5 * std::min(g.vol_nx(), g.vol_ny()) * g.voxel();
    const double half_z = 0.5 * g.vol_nz() * g.voxel();
    WalnutModel m;
    m.a = half_xy * uni(0.62, 0.70);
    m.b = m.a * uni(0.82, 0.97);
    m.c = half_z * uni(0.58, 0.66);
    m.yaw = uni(0.0, std::numbers::pi);
    m.thickness = uni(0.08, 0.11);
    m.shell_value = uni(0.035, 0.0375);
    m.wrinkle_amp = uni(0.015, 0.035);
    m.wrinkle_k1 = std::floor(uni(5.0, 9.0));
    m.wrinkle_k2 = std::floor(uni(2.0, 5.0));
    m.wrinkle_phase = uni(0.0, 2.0 * std::numbers::pi);
    m.septum_yaw = uni(0.0, std::numbers::pi);
    m.septum_half_width = g.voxel() * uni(0.45, 0.7);
    m.septum_value = uni(0.025, 0.032);
    m.gap_value = uni(0.001, 0.004);
    m.gap_half_width = uni(0.05, 0.09);
    m.lobes = 2 + static_cast<int>(std::floor(uni(0.0, 3.0)));

    const double base = uni(0.0, 2.0 * std::numbers::pi);
    for (int i = 0; i < m.lobes; ++i) {
        Lobe l;
        const double ang = base + 2.0 * std::numbers::pi * i / m.lobes + uni(-0.15, 0.15);
        const double r = uni(0.33, 0.42);
        l.cx = r * m.a * std::cos(ang);
        l.cy = r * m.b * std::sin(ang);
        l.cz = m.c * uni(-0.1, 0.1);
        l.ax = m.a * uni(0.42, 0.52);
        l.ay = m.b * uni(0.30, 0.40) * (m.lobes > 2 ? 0.8 : 1.0);
        l.az = m.c * uni(0.62, 0.78);
        l.yaw = ang;
        l.value = uni(0.016, 0.026);
        l.freq = 2.0 * std::numbers::pi / uni(4.0, 7.0);
        l.phase1 = uni(0.0, 2.0 * std::numbers::pi);
        l.phase2 = uni(0.0, 2.0 * std::numbers::pi);
        m.lobe.push_back(l);
    }
    return m;
}

}  // namespace

Volume3D make_phantom(std::uint64_t seed, const ConeBeamGeometry& geometry) {
    const WalnutModel model = make_model(seed, geometry);
    Volume3D vol = Volume3D::zeros(geometry);
    const Dims3 d = vol.dims();
    const double v = geometry.voxel();
    const double cx = 0.5 * (d.nx - 1), cy = 0.5 * (d.ny - 1), cz = 0.5 * (d.nz - 1);
    constexpr int kSuper = 2;

#pragma omp parallel for schedule(static)
    for (int z = 0; z < d.nz; ++z) {
        for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x) {
                double acc = 0.0;
                for (int sz = 0; sz < kSuper; ++sz) {
                    for (int sy = 0; sy < kSuper; ++sy) {
                        for (int sx = 0; sx < kSuper; ++sx) {
                            const double px = (x - cx + (sx + 0.5) / kSuper - 0.5) * v;
                            const double py = (y - cy + (sy + 0.5) / kSuper - 0.5) * v;
                            const double pz = (z - cz + (sz + 0.5) / kSuper - 0.5) * v;
                            acc += model.eval(px, py, pz);
                        }
                    }
                }
                const double val = acc / (kSuper * kSuper * kSuper);
                vol(x, y, z) = static_cast<float>(std::clamp(val, 0.0, kPhantomMaxAttenuation));
            }
        }
    }
    return vol;
}

Sinogram simulate_sinogram(const Volume3D& volume, const ConeBeamGeometry& geometry, const ViewSet& views,
                           std::uint64_t noise_seed, std::optional<double> dose) {
    if (dose && (!(*dose > 0) || !std::isfinite(*dose))) throw Error("simulate: dose must be > 0");
    Sinogram sino = forward_project(volume, geometry, views);
    if (!dose) return sino;
    std::mt19937_64 rng(noise_seed);
    const double i0 = *dose;
    for (float& y : sino.values()) {
        std::poisson_distribution<long long> poisson(i0 * std::exp(-double(y)));
        const double counts = std::max<double>(1.0, static_cast<double>(poisson(rng)));
        y = static_cast<float>(-std::log(counts / i0));
    }
    return sino;
}

Volume3D rescale_volume(const Volume3D& volume, double scale) {
    if (!(scale >= 0.5 && scale <= 1.5)) throw Error("rescale: scale must be in [0.5, 1.5]");
    const Dims3 d = volume.dims();
    const double c[3] = {0.5 * (d.nx - 1), 0.5 * (d.ny - 1), 0.5 * (d.nz - 1)};
    const int n[3] = {d.nx, d.ny, d.nz};

    int lo[3] = {d.nx, d.ny, d.nz}, hi[3] = {-1, -1, -1};
    for (int z = 0; z < d.nz; ++z) {
        for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x) {
                if (volume(x, y, z) == 0.0f) continue;
                const int p[3] = {x, y, z};
                for (int k = 0; k < 3; ++k) {
                    lo[k] = std::min(lo[k], p[k]);
                    hi[k] = std::max(hi[k], p[k]);
                }
            }
        }
    }
    if (hi[0] < 0) return volume;
    static const char* axis = "xyz";
    for (int k = 0; k < 3; ++k) {
        // The support edge moves by up to one voxel under interpolation.
        const double a = (lo[k] - 1 - c[k]) * scale + c[k];
        const double b = (hi[k] + 1 - c[k]) * scale + c[k];
        if (a < 0.0 || b > n[k] - 1) {
            throw Error(std::string("rescale: scaled object exceeds the grid along ") + axis[k]);
        }
    }

    Volume3D out(d, volume.voxel());
    auto sample = [&](int x, int y, int z) -> double {
        if (x < 0 || y < 0 || z < 0 || x >= d.nx || y >= d.ny || z >= d.nz) return 0.0;
        return volume(x, y, z);
    };
    for (int z = 0; z < d.nz; ++z) {
        const double sz = (z - c[2]) / scale + c[2];
        const int z0 = static_cast<int>(std::floor(sz));
        const double fz = sz - z0;
        for (int y = 0; y < d.ny; ++y) {
            const double sy = (y - c[1]) / scale + c[1];
            const int y0 = static_cast<int>(std::floor(sy));
            const double fy = sy - y0;
            for (int x = 0; x < d.nx; ++x) {
                const double sx = (x - c[0]) / scale + c[0];
                const int x0 = static_cast<int>(std::floor(sx));
                const double fx = sx - x0;
                double acc = 0.0;
                for (int k = 0; k < 8; ++k) {
                    const int ix = k & 1, iy = (k >> 1) & 1, iz = (k >> 2) & 1;
                    const double w = (ix ? fx : 1.0 - fx) * (iy ? fy : 1.0 - fy) * (iz ? fz : 1.0 - fz);
                    if (w == 0.0) continue;
                    acc += w * sample(x0 + ix, y0 + iy, z0 + iz);
                }
                out(x, y, z) = static_cast<float>(acc);
            }
        }
    }
    return out;
}

}  // namespace svct
