#include "svct/ep_recon.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "svct/error.hpp"

namespace svct {

void EpConfig::validate() const {
    if (!(beta_ep > 0) || !std::isfinite(beta_ep)) throw Error("ep: beta_ep must be > 0");
    if (!(delta > 0) || !std::isfinite(delta)) throw Error("ep: delta must be > 0");
    if (n_iters < 1) throw Error("ep: n_iters must be >= 1");
}

double hyperbola_potential(double t, double delta) {
    const double s = t / delta;
    return delta * delta * (std::sqrt(1.0 + s * s) - 1.0);
}

double hyperbola_derivative(double t, double delta) {
    const double s = t / delta;
    return t / std::sqrt(1.0 + s * s);
}

namespace {

// Calls f(j, k) for every forward-difference pair (k = j + unit step).
template <typename F>
void for_each_pair(Dims3 dims, F&& f) {
    const std::size_t sx = 1;
    const std::size_t sy = static_cast<std::size_t>(dims.nx);
    const std::size_t sz = sy * dims.ny;
    std::size_t j = 0;
    for (int z = 0; z < dims.nz; ++z) {
        for (int y = 0; y < dims.ny; ++y) {
            for (int x = 0; x < dims.nx; ++x, ++j) {
                if (x + 1 < dims.nx) f(j, j + sx);
                if (y + 1 < dims.ny) f(j, j + sy);
                if (z + 1 < dims.nz) f(j, j + sz);
            }
        }
    }
}

double difference_energy(std::span<const double> d, Dims3 dims) {
    double acc = 0.0;
    for_each_pair(dims, [&](std::size_t j, std::size_t k) {
        const double t = d[j] - d[k];
        acc += t * t;
    });
    return acc;
}

Dims3 dims_of(const ConeBeamGeometry& g) { return {g.vol_nx(), g.vol_ny(), g.vol_nz()}; }

double half_norm2(std::span<const double> r) {
    double acc = 0.0;
    for (double v : r) acc += v * v;
    return 0.5 * acc;
}

}  // namespace

double ep_penalty(std::span<const double> x, Dims3 dims, double delta) {
    if (x.size() != dims.count()) throw ShapeError("ep_penalty: size mismatch");
    double acc = 0.0;
    for_each_pair(dims, [&](std::size_t j, std::size_t k) { acc += hyperbola_potential(x[j] - x[k], delta); });
    return acc;
}

void ep_penalty_gradient(std::span<const double> x, Dims3 dims, double delta, double scale,
                         std::span<double> grad) {
    if (x.size() != dims.count() || grad.size() != dims.count()) {
        throw ShapeError("ep_penalty_gradient: size mismatch");
    }
    for_each_pair(dims, [&](std::size_t j, std::size_t k) {
        const double d = scale * hyperbola_derivative(x[j] - x[k], delta);
        grad[j] += d;
        grad[k] -= d;
    });
}

double ep_objective(const ConeBeamProjector& proj, std::span<const double> x, std::span<const double> y,
                    const EpConfig& cfg) {
    if (y.size() != proj.sinogram_size()) throw ShapeError("ep_objective: sinogram size mismatch");
    auto r = proj.forward(x);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
    return half_norm2(r) + cfg.beta_ep * ep_penalty(x, dims_of(proj.geometry()), cfg.delta);
}

std::vector<double> ep_gradient(const ConeBeamProjector& proj, std::span<const double> x,
                                std::span<const double> y, const EpConfig& cfg) {
    if (y.size() != proj.sinogram_size()) throw ShapeError("ep_gradient: sinogram size mismatch");
    auto r = proj.forward(x);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
    auto g = proj.back(r);
    ep_penalty_gradient(x, dims_of(proj.geometry()), cfg.delta, cfg.beta_ep, g);
    return g;
}

double ep_objective(const Volume3D& x, const Sinogram& y, const EpConfig& cfg) {
    if (!x.matches(y.geometry())) throw ShapeError("ep_objective: volume does not match sinogram geometry");
    const ConeBeamProjector proj(y.geometry(), y.views());
    return ep_objective(proj, to_double(x.data()), to_double(y.data()), cfg);
}

Volume3D ep_gradient(const Volume3D& x, const Sinogram& y, const EpConfig& cfg) {
    if (!x.matches(y.geometry())) throw ShapeError("ep_gradient: volume does not match sinogram geometry");
    const ConeBeamProjector proj(y.geometry(), y.views());
    auto g = ep_gradient(proj, to_double(x.data()), to_double(y.data()), cfg);
    return Volume3D(x.dims(), x.voxel(), to_float(g));
}

EpResult ep_reconstruct(const Sinogram& y_sino, const EpConfig& cfg, const Volume3D& init) {
    cfg.validate();
    const auto& geom = y_sino.geometry();
    if (!init.matches(geom)) throw ShapeError("ep_reconstruct: init dims do not match geometry");
    const ConeBeamProjector proj(geom, y_sino.views());
    const Dims3 dims = dims_of(geom);
    const std::size_t n = geom.volume_size();
    const auto y = to_double(y_sino.data());

    std::vector<double> x = to_double(init.data());
    if (cfg.clamp_nonnegative) {
        for (double& v : x) v = std::max(v, 0.0);
    }

    auto residual_of = [&](std::span<const double> xs) {
        auto r = proj.forward(xs);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
        return r;
    };
    auto objective_of = [&](std::span<const double> r, std::span<const double> xs) {
        return half_norm2(r) + cfg.beta_ep * ep_penalty(xs, dims, cfg.delta);
    };
    auto gradient_of = [&](std::span<const double> r, std::span<const double> xs) {
        auto g = proj.back(r);
        ep_penalty_gradient(xs, dims, cfg.delta, cfg.beta_ep, g);
        return g;
    };

    std::vector<double> r = residual_of(x);
    double f = objective_of(r, x);
    if (!std::isfinite(f)) throw NumericError("ep_reconstruct: non-finite objective at iteration 0");
    std::vector<double> g = gradient_of(r, x);
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];

    EpResult result;
    result.objective.push_back(f);
    std::vector<double> x_trial(n), r_trial;

    for (int iter = 1; iter <= cfg.n_iters; ++iter) {
        if (cfg.clamp_nonnegative) {
            for (std::size_t i = 0; i < n; ++i) {
                if (x[i] <= 0.0 && d[i] < 0.0) d[i] = 0.0;
            }
        }
        double slope = dot(g, d);
        if (!(slope < 0.0)) {
            // Not a descent direction: restart along the (projected) negative gradient.
            for (std::size_t i = 0; i < n; ++i) {
                d[i] = (cfg.clamp_nonnegative && x[i] <= 0.0 && g[i] > 0.0) ? 0.0 : -g[i];
            }
            slope = dot(g, d);
        }
        if (!(slope < 0.0)) {
            result.objective.push_back(f);
            continue;
        }

        const auto Ad = proj.forward(d);
        const double curvature = 2.0 * half_norm2(Ad) + cfg.beta_ep * difference_energy(d, dims);
        double alpha = curvature > 0.0 ? -slope / curvature : 1.0;

        bool accepted = false;
        double f_trial = f;
        for (int halving = 0; halving < 40; ++halving, alpha *= 0.5) {
            bool clipped = false;
            for (std::size_t i = 0; i < n; ++i) {
                double v = x[i] + alpha * d[i];
                if (cfg.clamp_nonnegative && v < 0.0) {
                    v = 0.0;
                    clipped = true;
                }
                x_trial[i] = v;
            }
            if (clipped) {
                r_trial = residual_of(x_trial);
            } else {
                r_trial.resize(r.size());
                for (std::size_t i = 0; i < r.size(); ++i) r_trial[i] = r[i] + alpha * Ad[i];
            }
            f_trial = objective_of(r_trial, x_trial);
            if (!std::isfinite(f_trial)) {
                throw NumericError("ep_reconstruct: non-finite objective at iteration " + std::to_string(iter));
            }
            if (f_trial <= f) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            result.objective.push_back(f);
            break;
        }

        x.swap(x_trial);
        r.swap(r_trial);
        f = f_trial;
        auto g_new = gradient_of(r, x);
        double num = 0.0;
        double den = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            num += g_new[i] * (g_new[i] - g[i]);
            den += g[i] * g[i];
        }
        const double beta_pr = den > 0.0 ? std::max(0.0, num / den) : 0.0;
        for (std::size_t i = 0; i < n; ++i) d[i] = -g_new[i] + beta_pr * d[i];
        g.swap(g_new);
        result.objective.push_back(f);
    }

    result.volume = Volume3D(init.dims(), init.voxel(), to_float(x));
    return result;
}

double estimate_normal_operator_norm(const ConeBeamProjector& proj, int iters) {
    std::vector<double> v(proj.volume_size(), 1.0);
    double lambda = 0.0;
    for (int i = 0; i < iters; ++i) {
        double norm = std::sqrt(dot(v, v));
        if (norm == 0.0) return 0.0;
        for (double& e : v) e /= norm;
        const auto w = proj.back(proj.forward(v));
        lambda = dot(v, w);
        v = w;
    }
    return lambda;
}

double ep_scale_factor(const ConeBeamProjector& proj) { return estimate_normal_operator_norm(proj) / 12.0; }

EpConfig default_ep_config(const ConeBeamGeometry& geometry, const ViewSet& views) {
    EpConfig cfg;
    cfg.delta = 0.1 * kShellAttenuation;
    cfg.beta_ep = kEpBetaMultiplier * ep_scale_factor(ConeBeamProjector(geometry, views));
    return cfg;
}

}  // namespace svct
