#pragma once

#include <span>
#include <vector>

#include "svct/projector.hpp"
#include "svct/volume.hpp"

namespace svct {

/// Edge-preserving penalized least squares:
///   Phi(x) = 1/2 ||A x - y||^2 + beta_ep * sum over 6-neighbour pairs psi(x_j - x_k)
/// with the hyperbola psi(t) = delta^2 (sqrt(1 + (t/delta)^2) - 1).
struct EpConfig {
    double beta_ep = 1.0;
    double delta = 0.004;
    int n_iters = 60;
    bool clamp_nonnegative = true;

    void validate() const;
};

double hyperbola_potential(double t, double delta);
double hyperbola_derivative(double t, double delta);

/// Sum of psi over every unordered 6-connected neighbour pair (forward
/// differences along x, y and z).
double ep_penalty(std::span<const double> x, Dims3 dims, double delta);
/// Gradient of ep_penalty, accumulated into `grad` with weight `scale`.
void ep_penalty_gradient(std::span<const double> x, Dims3 dims, double delta, double scale,
                         std::span<double> grad);

double ep_objective(const ConeBeamProjector& proj, std::span<const double> x, std::span<const double> y,
                    const EpConfig& cfg);
std::vector<double> ep_gradient(const ConeBeamProjector& proj, std::span<const double> x,
                                std::span<const double> y, const EpConfig& cfg);

double ep_objective(const Volume3D& x, const Sinogram& y, const EpConfig& cfg);
Volume3D ep_gradient(const Volume3D& x, const Sinogram& y, const EpConfig& cfg);

struct EpResult {
    Volume3D volume;
    /// Phi at the initial point followed by Phi after each iteration.
    std::vector<double> objective;
};

/// Polak-Ribiere nonlinear CG with restarts and a projected backtracking line
/// search. The trial step is the minimiser of a quadratic majorizer of Phi
/// along the search direction (psi'' <= 1), halved until Phi does not
/// increase. When clamping is on, trial points are projected onto x >= 0
/// before evaluation, so the returned iterate is nonnegative and Phi never
/// increases.
EpResult ep_reconstruct(const Sinogram& y, const EpConfig& cfg, const Volume3D& init);

/// Largest eigenvalue of A^T A by power iteration (deterministic start).
double estimate_normal_operator_norm(const ConeBeamProjector& proj, int iters = 20);

/// Ratio between the largest data-term and penalty curvatures,
/// ||A^T A|| / 12 (12 bounds the 6-neighbour difference operator).
double ep_scale_factor(const ConeBeamProjector& proj);

/// Frozen defaults: delta = 10% of the nominal 0.04/mm shell attenuation and
/// beta_ep = kEpBetaMultiplier * ep_scale_factor(A).
inline constexpr double kEpBetaMultiplier = 0.01;
inline constexpr double kShellAttenuation = 0.04;
EpConfig default_ep_config(const ConeBeamGeometry& geometry, const ViewSet& views);

}  // namespace svct
