#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "svct/fdk.hpp"
#include "svct/metrics.hpp"
#include "svct/phantom.hpp"
#include "svct/projector.hpp"
#include "test_util.hpp"

using namespace svct;

TEST_SUITE("fdk") {
TEST_CASE("impulse row reproduces the spatial ramp kernel") {
    const int n = 48;
    const double pitch = 2.5;
    std::vector<double> row(n, 0.0);
    const int j = 20;
    row[j] = 1.0;
    const auto out = ramp_filter_row(row, RampFilter::RamLak, pitch);
    const double h0 = 1.0 / (4.0 * pitch * pitch);
    for (int k = 0; k < n; ++k) {
        const int m = k - j;
        double oracle;
        if (m == 0) oracle = 1.0 / (4.0 * pitch * pitch);
        else if (m % 2 == 0) oracle = 0.0;
        else oracle = -1.0 / (m * m * std::numbers::pi * std::numbers::pi * pitch * pitch);
        CHECK(std::abs(out[k] - pitch * oracle) <= 1e-6 * pitch * h0);
    }
}

TEST_CASE("zero-frequency gain equals the windowed kernel sum") {
    // The padded response at f = 0 is pitch * sum of the kernel taps over the
    // padded window. The missing odd tails sum to about 2 / (pi^2 L pitch),
    // against a peak gain near 1 / (2 pitch).
    const double pitch = 1.0;
    RampFilterPlan plan(48, RampFilter::RamLak, pitch);
    const int L = plan.padded_length();
    double sum = 0.0;
    for (int m = -L / 2; m < L / 2; ++m) {
        double h;
        if (m == 0) h = 0.25;
        else if (m % 2 == 0) h = 0.0;
        else h = -1.0 / (m * m * std::numbers::pi * std::numbers::pi);
        sum += h;
    }
    const auto& resp = plan.response();
    CHECK(resp[0] == doctest::Approx(pitch * sum).epsilon(1e-9));
    const double peak = *std::max_element(resp.begin(), resp.end());
    CHECK(resp[0] <= 5.0 / (std::numbers::pi * std::numbers::pi * L) * peak);
}

TEST_CASE("filtering is linear") {
    const auto a = test::random_vector(40, 1);
    const auto b = test::random_vector(40, 2);
    std::vector<double> ab(40);
    for (int i = 0; i < 40; ++i) ab[i] = a[i] + b[i];
    for (auto f : {RampFilter::RamLak, RampFilter::Hann}) {
        const auto fa = ramp_filter_row(a, f, 1.3), fb = ramp_filter_row(b, f, 1.3), fab = ramp_filter_row(ab, f, 1.3);
        for (int i = 0; i < 40; ++i) CHECK(fab[i] == doctest::Approx(fa[i] + fb[i]).epsilon(1e-9));
    }
}

TEST_CASE("filter names") {
    CHECK(parse_ramp_filter("hann") == RampFilter::Hann);
    CHECK(parse_ramp_filter("ramlak") == RampFilter::RamLak);
    CHECK(parse_ramp_filter("ram-lak") == RampFilter::RamLak);
    CHECK_THROWS(parse_ramp_filter("shepp"));
}

TEST_CASE("zero sinogram gives zero volume, and reconstruction is linear") {
    const auto g = test::small_geometry();
    const auto views = view_angles(6, 0.0);
    Sinogram zero(g, views);
    const auto rz = fdk_reconstruct(zero);
    for (float v : rz.values()) CHECK(v == 0.0f);

    Sinogram a(g, views, test::random_floats(g.detector_size() * 6, 3));
    Sinogram b(g, views, test::random_floats(g.detector_size() * 6, 4));
    Sinogram ab(g, views);
    for (std::size_t i = 0; i < ab.size(); ++i) ab.values()[i] = a.values()[i] + b.values()[i];
    const auto ra = fdk_reconstruct(a), rb = fdk_reconstruct(b), rab = fdk_reconstruct(ab);
    double scale = 0.0;
    for (float v : rab.values()) scale = std::max(scale, double(std::abs(v)));
    for (std::size_t i = 0; i < rab.size(); ++i) {
        CHECK(std::abs(rab.values()[i] - (ra.values()[i] + rb.values()[i])) <= 1e-5 * scale);
    }
}

TEST_CASE("dense views beat sparse views on the desk phantom") {
    const auto g = make_geometry("desk");
    const auto gt = make_phantom(0, g);
    const auto mask = make_mask(gt, 3);
    const double dense = nmae(gt, fdk_reconstruct(simulate_sinogram(gt, g, view_angles(64, 0.0))), mask);
    const double sparse = nmae(gt, fdk_reconstruct(simulate_sinogram(gt, g, view_angles(8, 0.0))), mask);
    MESSAGE("fdk nmae 64 views " << dense << ", 8 views " << sparse);
    CHECK(dense < sparse);
}
}
