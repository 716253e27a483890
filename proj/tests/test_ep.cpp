#include <doctest.h>

#include <cmath>

#include "svct/ep_recon.hpp"
#include "svct/fdk.hpp"
#include "svct/metrics.hpp"
#include "svct/phantom.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace svct;

TEST_SUITE("ep_recon") {
TEST_CASE("hyperbola potential limits") {
    const double d = 0.004;
    CHECK(hyperbola_potential(0.0, d) == 0.0);
    const double small = 1e-3 * d;
    CHECK(hyperbola_potential(small, d) == doctest::Approx(0.5 * small * small).epsilon(1e-6));
    const double big = 1e4 * d;
    CHECK(hyperbola_potential(big, d) == doctest::Approx(d * big - d * d).epsilon(1e-6));
    CHECK(hyperbola_derivative(d, d) == doctest::Approx(d / std::sqrt(2.0)).epsilon(1e-14));
    CHECK(hyperbola_derivative(-d, d) == doctest::Approx(-d / std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("objective matches a brute-force oracle") {
    const auto g = test::small_geometry();
    const ConeBeamProjector p(g, view_angles(5, 0.0));
    const Dims3 d{8, 8, 8};
    EpConfig cfg;
    cfg.beta_ep = 0.7;
    cfg.delta = 0.05;
    const auto x = test::random_vector(p.volume_size(), 11, 0.0, 0.1);
    const auto y = test::random_vector(p.sinogram_size(), 12, 0.0, 1.0);
    auto r = p.forward(x);
    double data = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) data += 0.5 * (r[i] - y[i]) * (r[i] - y[i]);
    const double oracle = data + cfg.beta_ep * test::naive_penalty(x, d, cfg.delta);
    CHECK(std::abs(ep_objective(p, x, y, cfg) - oracle) <= 1e-10 * std::abs(oracle));
}

TEST_CASE("consistent constant image is stationary with zero objective") {
    const auto g = test::small_geometry();
    const ConeBeamProjector p(g, view_angles(4, 0.0));
    std::vector<double> x(p.volume_size(), 0.02);
    const auto y = p.forward(x);
    EpConfig cfg;
    CHECK(ep_objective(p, x, y, cfg) == doctest::Approx(0.0));
    for (double v : ep_gradient(p, x, y, cfg)) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("gradient matches central finite differences") {
    const auto g = test::small_geometry();
    const ConeBeamProjector p(g, view_angles(5, 0.0));
    EpConfig cfg;
    cfg.beta_ep = 2.0;
    cfg.delta = 0.05;
    const auto x = test::random_vector(p.volume_size(), 21, 0.0, 0.2);
    const auto y = test::random_vector(p.sinogram_size(), 22, 0.0, 2.0);
    const auto grad = ep_gradient(p, x, y, cfg);
    double gmax = 0.0;
    for (double v : grad) gmax = std::max(gmax, std::abs(v));

    const double h = 1e-5;
    for (std::size_t i = 0; i < x.size(); i += 7) {
        auto xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (ep_objective(p, xp, y, cfg) - ep_objective(p, xm, y, cfg)) / (2 * h);
        CHECK(std::abs(fd - grad[i]) <= 1e-4 * std::max(std::abs(grad[i]), 1e-2 * gmax));
    }
    const auto dir = test::random_vector(x.size(), 23);
    auto xp = x, xm = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xp[i] += h * dir[i];
        xm[i] -= h * dir[i];
    }
    const double fd = (ep_objective(p, xp, y, cfg) - ep_objective(p, xm, y, cfg)) / (2 * h);
    const double an = dot(grad, dir);
    CHECK(std::abs(fd - an) <= 1e-4 * std::abs(an));
}

TEST_CASE("objective is monotone and the iterate nonnegative") {
    const auto g = make_geometry("desk");
    const auto gt = make_phantom(1, g);
    const auto y = simulate_sinogram(gt, g, view_angles(8, 0.0));
    EpConfig cfg = default_ep_config(g, y.views());
    cfg.n_iters = 12;
    const auto r = ep_reconstruct(y, cfg, fdk_reconstruct(y));
    REQUIRE(r.objective.size() >= 2);
    for (std::size_t k = 1; k < r.objective.size(); ++k) {
        CHECK(r.objective[k] <= r.objective[k - 1] + 1e-12 * std::abs(r.objective[k - 1]));
    }
    for (float v : r.volume.values()) CHECK(v >= 0.0f);
}

TEST_CASE("tiny beta with dense views drives the residual down monotonically") {
    const auto g = test::small_geometry();
    const auto views = view_angles(24, 0.0);
    const auto gt = test::random_volume({8, 8, 8}, 31, 0.0f, 0.05f);
    const auto y = simulate_sinogram(gt, g, views);
    const ConeBeamProjector p(g, views);
    const auto yd = to_double(y.data());
    EpConfig cfg;
    cfg.beta_ep = 1e-9;
    cfg.clamp_nonnegative = false;
    double prev = 1e300;
    Volume3D x = Volume3D::zeros(g);
    for (int k = 0; k < 6; ++k) {
        cfg.n_iters = 1;
        x = ep_reconstruct(y, cfg, x).volume;
        auto r = p.forward(to_double(x.data()));
        double res = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) res += (r[i] - yd[i]) * (r[i] - yd[i]);
        CHECK(res <= prev);
        prev = res;
    }
}

TEST_CASE("EP beats FDK on the desk phantom at 8 views") {
    const auto g = make_geometry("desk");
    const auto gt = make_phantom(2, g);
    const auto y = simulate_sinogram(gt, g, view_angles(8, 0.0));
    const auto mask = make_mask(gt, 3);
    const auto fdk = fdk_reconstruct(y);
    const auto ep = ep_reconstruct(y, default_ep_config(g, y.views()), fdk).volume;
    const double e_fdk = nmae(gt, fdk, mask), e_ep = nmae(gt, ep, mask);
    MESSAGE("nmae fdk " << e_fdk << ", ep " << e_ep);
    CHECK(e_ep < e_fdk);
}

TEST_CASE("config validation") {
    EpConfig c;
    c.beta_ep = 0.0;
    CHECK_THROWS(c.validate());
    c = EpConfig{};
    c.n_iters = 0;
    CHECK_THROWS(c.validate());
    const auto g = test::small_geometry();
    Sinogram y(g, view_angles(2, 0.0));
    CHECK_THROWS(ep_reconstruct(y, EpConfig{}, Volume3D({4, 4, 4}, 1.0)));
}
}
