#include "svct/dc_solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "svct/error.hpp"

namespace svct {

DcResult solve_data_consistency(const ConeBeamProjector& proj, std::span<const double> y,
                                std::span<const double> x_g, double beta, int n_cg) {
    if (!(beta > 0) || !std::isfinite(beta)) throw Error("data_consistency: beta must be > 0");
    if (n_cg < 1) throw Error("data_consistency: n_cg must be >= 1");
    if (y.size() != proj.sinogram_size()) throw ShapeError("data_consistency: sinogram size mismatch");
    if (x_g.size() != proj.volume_size()) throw ShapeError("data_consistency: prior size mismatch");

    const std::size_t n = x_g.size();
    const std::size_t m = y.size();
    DcResult out;
    out.x.assign(x_g.begin(), x_g.end());

    // Ax tracks A x_k so the objective costs no extra projections.
    std::vector<double> Ax = proj.forward(out.x);
    auto objective = [&] {
        double data = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double d = Ax[i] - y[i];
            data += d * d;
        }
        double prior = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = out.x[i] - x_g[i];
            prior += d * d;
        }
        return data + beta * prior;
    };

    // r = A^T y + beta x_g - (A^T A + beta I) x_g = A^T (y - A x_g).
    std::vector<double> misfit(m);
    for (std::size_t i = 0; i < m; ++i) misfit[i] = y[i] - Ax[i];
    std::vector<double> r = proj.back(misfit);
    std::vector<double> p = r;
    double rr = dot(r, r);
    out.objective.push_back(objective());

    std::vector<double> Ap(m);
    for (int k = 0; k < n_cg; ++k) {
        if (rr == 0.0) break;
        proj.forward(p, Ap);
        const auto AtAp = proj.back(Ap);
        double curvature = 0.0;
        for (std::size_t i = 0; i < n; ++i) curvature += p[i] * (AtAp[i] + beta * p[i]);
        if (!(curvature > 0.0) || !std::isfinite(curvature)) {
            out.breakdown = true;
            break;
        }
        const double alpha = rr / curvature;
        for (std::size_t i = 0; i < n; ++i) {
            out.x[i] += alpha * p[i];
            r[i] -= alpha * (AtAp[i] + beta * p[i]);
        }
        for (std::size_t i = 0; i < m; ++i) Ax[i] += alpha * Ap[i];
        const double rr_new = dot(r, r);
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + (rr_new / rr) * p[i];
        rr = rr_new;
        ++out.iterations;
        out.objective.push_back(objective());
    }
    return out;
}

DataConsistencyOutput data_consistency(const Volume3D& x_g, const Sinogram& y, const DcOptions& options) {
    if (!x_g.matches(y.geometry())) throw ShapeError("data_consistency: prior does not match sinogram geometry");
    const ConeBeamProjector proj(y.geometry(), y.views());
    auto solved = solve_data_consistency(proj, to_double(y.data()), to_double(x_g.data()), options.beta, options.n_cg);
    if (options.clamp_nonnegative) {
        for (double& v : solved.x) v = std::max(v, 0.0);
    }
    return {Volume3D(x_g.dims(), x_g.voxel(), to_float(solved.x)), std::move(solved.objective), solved.breakdown};
}

}  // namespace svct
