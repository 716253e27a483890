#pragma once

#include <span>
#include <vector>

#include "svct/projector.hpp"
#include "svct/volume.hpp"

namespace svct {

struct DcOptions {
    double beta = 1.0;
    int n_cg = 50;
    bool clamp_nonnegative = true;  // applied once, after the solve
};

struct DcResult {
    std::vector<double> x;
    /// ||A x_k - y||^2 + beta ||x_k - x_g||^2 for k = 0 (the prior) .. final.
    std::vector<double> objective;
    int iterations = 0;
    /// Set when a search direction had nonpositive curvature; x is the last
    /// good iterate.
    bool breakdown = false;
};

/// Minimises ||A x - y||^2 + beta ||x - x_g||^2 with linear CG on the normal
/// equations (A^T A + beta I) x = A^T y + beta x_g, starting from x_g. Exact
/// convergence (zero residual) ends the loop early without a breakdown flag.
/// The clamp option is ignored here; callers on Volume3D apply it.
DcResult solve_data_consistency(const ConeBeamProjector& proj, std::span<const double> y,
                                std::span<const double> x_g, double beta, int n_cg);

struct DataConsistencyOutput {
    Volume3D volume;
    std::vector<double> objective;
    bool breakdown = false;
};

DataConsistencyOutput data_consistency(const Volume3D& x_g, const Sinogram& y, const DcOptions& options = {});

}  // namespace svct
