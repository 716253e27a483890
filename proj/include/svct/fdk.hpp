#pragma once

#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "svct/volume.hpp"

namespace svct {

enum class RampFilter { RamLak, Hann };

RampFilter parse_ramp_filter(std::string_view name);

/// Row-wise ramp filter. The frequency response is the DFT of the band-limited
/// spatial ramp kernel on a zero-padded grid (length the next power of two at
/// least twice the row), optionally Hann-apodized, and includes the pitch
/// factor of the discrete convolution.
class RampFilterPlan {
public:
    RampFilterPlan(int row_length, RampFilter filter, double pitch);
    ~RampFilterPlan();
    RampFilterPlan(const RampFilterPlan&) = delete;
    RampFilterPlan& operator=(const RampFilterPlan&) = delete;

    int row_length() const { return n_; }
    int padded_length() const { return padded_; }

    /// Filters `row` in place.
    void apply(std::span<double> row);

    /// Real frequency response for bins 0..padded/2.
    const std::vector<double>& response() const { return response_; }

private:
    struct Fft;
    int n_;
    int padded_;
    std::vector<double> response_;
    std::unique_ptr<Fft> fft_;
};

std::vector<double> ramp_filter_row(std::span<const double> row, RampFilter filter, double pitch);

/// Spatial band-limited ramp kernel h[n] at sampling `pitch`:
/// 1/(4 pitch^2) at 0, 0 at even n, -1/(n^2 pi^2 pitch^2) at odd n.
double ramp_kernel_tap(int n, double pitch);

/// Feldkamp-Davis-Kress reconstruction for a full circular scan: cosine
/// weighting, row-wise ramp filtering on the isocenter-scaled detector, and
/// voxel-driven bilinear backprojection with the (dso / depth)^2 weight,
/// scaled by pi / n_views.
Volume3D fdk_reconstruct(const Sinogram& sinogram, RampFilter filter = RampFilter::Hann);

}  // namespace svct
