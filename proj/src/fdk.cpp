#include "svct/fdk.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

#include "svct/error.hpp"

namespace svct {

namespace {

// FFTW's planner is not thread-safe.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace

RampFilter parse_ramp_filter(std::string_view name) {
    if (name == "hann") return RampFilter::Hann;
    if (name == "ramlak" || name == "ram-lak") return RampFilter::RamLak;
    throw Error("unknown ramp filter '" + std::string(name) + "' (expected hann or ramlak)");
}

double ramp_kernel_tap(int n, double pitch) {
    if (n == 0) return 1.0 / (4.0 * pitch * pitch);
    if (n % 2 == 0) return 0.0;
    const double pi = std::numbers::pi;
    return -1.0 / (double(n) * n * pi * pi * pitch * pitch);
}

struct RampFilterPlan::Fft {
    double* real = nullptr;
    fftw_complex* spectrum = nullptr;
    fftw_plan forward = nullptr;
    fftw_plan inverse = nullptr;

    explicit Fft(int padded) {
        std::lock_guard lock(planner_mutex());
        real = fftw_alloc_real(padded);
        spectrum = fftw_alloc_complex(padded / 2 + 1);
        forward = fftw_plan_dft_r2c_1d(padded, real, spectrum, FFTW_ESTIMATE);
        inverse = fftw_plan_dft_c2r_1d(padded, spectrum, real, FFTW_ESTIMATE);
    }
    ~Fft() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(forward);
        fftw_destroy_plan(inverse);
        fftw_free(real);
        fftw_free(spectrum);
    }
};

RampFilterPlan::RampFilterPlan(int row_length, RampFilter filter, double pitch)
    : n_(row_length), padded_(next_pow2(2 * row_length)) {
    if (row_length < 2) throw ShapeError("ramp filter: row length must be >= 2");
    if (!(pitch > 0)) throw Error("ramp filter: pitch must be > 0");
    fft_ = std::make_unique<Fft>(padded_);

    // Circularly arranged kernel, times pitch for the convolution sum.
    for (int i = 0; i < padded_; ++i) {
        const int n = i <= padded_ / 2 ? i : i - padded_;
        fft_->real[i] = pitch * ramp_kernel_tap(n, pitch);
    }
    fftw_execute(fft_->forward);
    const int bins = padded_ / 2 + 1;
    response_.resize(bins);
    for (int k = 0; k < bins; ++k) {
        double h = fft_->spectrum[k][0];  // symmetric kernel: imaginary part vanishes
        if (filter == RampFilter::Hann) h *= 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * k / padded_));
        response_[k] = h;
    }
}

RampFilterPlan::~RampFilterPlan() = default;

void RampFilterPlan::apply(std::span<double> row) {
    if (static_cast<int>(row.size()) != n_) throw ShapeError("ramp filter: row length mismatch");
    std::fill(fft_->real, fft_->real + padded_, 0.0);
    std::copy(row.begin(), row.end(), fft_->real);
    fftw_execute(fft_->forward);
    const int bins = padded_ / 2 + 1;
    const double scale = 1.0 / padded_;
    for (int k = 0; k < bins; ++k) {
        fft_->spectrum[k][0] *= response_[k] * scale;
        fft_->spectrum[k][1] *= response_[k] * scale;
    }
    fftw_execute(fft_->inverse);
    std::copy(fft_->real, fft_->real + n_, row.begin());
}

std::vector<double> ramp_filter_row(std::span<const double> row, RampFilter filter, double pitch) {
    RampFilterPlan plan(static_cast<int>(row.size()), filter, pitch);
    std::vector<double> out(row.begin(), row.end());
    plan.apply(out);
    return out;
}

Volume3D fdk_reconstruct(const Sinogram& sinogram, RampFilter filter) {
    const auto& g = sinogram.geometry();
    const int rows = g.det_rows();
    const int cols = g.det_cols();
    const int n_views = sinogram.n_views();
    const double p = g.det_pixel();
    const double dsd = g.dsd();
    const double dso = g.dso();

    // Weighted, filtered projections on the physical detector grid. Filtering
    // uses the pitch of the detector scaled back to the isocenter.
    std::vector<double> filtered(sinogram.size());
    {
        RampFilterPlan plan(cols, filter, p * dso / dsd);
        std::vector<double> row(cols);
        for (int v = 0; v < n_views; ++v) {
            const auto proj = sinogram.view(v);
            for (int r = 0; r < rows; ++r) {
                const double vv = (r - 0.5 * (rows - 1)) * p;
                for (int c = 0; c < cols; ++c) {
                    const double uu = (c - 0.5 * (cols - 1)) * p;
                    row[c] = proj[static_cast<std::size_t>(r) * cols + c] * dsd / std::sqrt(dsd * dsd + uu * uu + vv * vv);
                }
                plan.apply(row);
                std::copy(row.begin(), row.end(),
                          filtered.begin() + (static_cast<std::size_t>(v) * rows + r) * cols);
            }
        }
    }

    std::vector<double> cos_v(n_views), sin_v(n_views);
    for (int v = 0; v < n_views; ++v) {
        cos_v[v] = std::cos(sinogram.views().angles[v]);
        sin_v[v] = std::sin(sinogram.views().angles[v]);
    }

    Volume3D out = Volume3D::zeros(g);
    const double scale = std::numbers::pi / n_views;
    const std::size_t det = g.detector_size();

#pragma omp parallel for schedule(static)
    for (int iz = 0; iz < g.vol_nz(); ++iz) {
        const double pz = (iz - 0.5 * (g.vol_nz() - 1)) * g.voxel();
        for (int iy = 0; iy < g.vol_ny(); ++iy) {
            const double py = (iy - 0.5 * (g.vol_ny() - 1)) * g.voxel();
            for (int ix = 0; ix < g.vol_nx(); ++ix) {
                const double px = (ix - 0.5 * (g.vol_nx() - 1)) * g.voxel();
                double acc = 0.0;
                for (int v = 0; v < n_views; ++v) {
                    const double along = px * cos_v[v] + py * sin_v[v];
                    const double across = -px * sin_v[v] + py * cos_v[v];
                    const double depth = dso - along;
                    const double mag = dsd / depth;
                    const double fc = mag * across / p + 0.5 * (cols - 1);
                    const double fr = mag * pz / p + 0.5 * (rows - 1);
                    const int c0 = static_cast<int>(std::floor(fc));
                    const int r0 = static_cast<int>(std::floor(fr));
                    const double tc = fc - c0;
                    const double tr = fr - r0;
                    const double* q = filtered.data() + static_cast<std::size_t>(v) * det;
                    auto tap = [&](int r, int c) -> double {
                        if (r < 0 || r >= rows || c < 0 || c >= cols) return 0.0;
                        return q[static_cast<std::size_t>(r) * cols + c];
                    };
                    const double sample = (1 - tr) * ((1 - tc) * tap(r0, c0) + tc * tap(r0, c0 + 1)) +
                                          tr * ((1 - tc) * tap(r0 + 1, c0) + tc * tap(r0 + 1, c0 + 1));
                    const double w = dso / depth;
                    acc += w * w * sample;
                }
                out(ix, iy, iz) = static_cast<float>(scale * acc);
            }
        }
    }
    return out;
}

}  // namespace svct
