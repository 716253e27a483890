#include <doctest.h>

#include <cmath>
#include <cstring>
#include <sstream>

#include "svct/error.hpp"
#include "svct/nn.hpp"
#include "test_util.hpp"

using namespace svct;
using namespace svct::nn;

namespace {

// Random weights at init scale plus small random biases so every ReLU
// sees both signs.
std::pair<GeneratorParams<double>, DiscriminatorParams<double>> random_params(std::uint64_t seed) {
    auto [g, d] = init_params<double>(seed);
    const auto gb = test::random_vector(g.size(), seed + 100, -0.05, 0.05);
    for (std::size_t t = 0; t < kGeneratorTensors.size(); t += 2) {
        auto b = g.tensor(t + 1);
        const std::size_t off = offset_of(kGeneratorTensors, t + 1);
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = gb[off + i];
    }
    const auto db = test::random_vector(d.size(), seed + 200, -0.05, 0.05);
    for (std::size_t t = 0; t < kDiscriminatorTensors.size(); t += 2) {
        auto b = d.tensor(t + 1);
        const std::size_t off = offset_of(kDiscriminatorTensors, t + 1);
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = db[off + i];
    }
    return {g, d};
}

}  // namespace

TEST_SUITE("nn") {
TEST_CASE("tensor shapes") {
    CHECK(kGenFlat == 32);
    CHECK(kDiscFeatures == 1152);
    CHECK(GeneratorParams<float>::kSize == 8 * 27 + 8 + 8 * 8 * 27 + 8 + 16 * 32 * 9 + 16 + 16 * 9 + 1);
    CHECK(DiscriminatorParams<float>::kSize == 8 * 9 + 8 + 8 * 8 * 9 + 8 + 1152 * 8 + 8 + 64 + 8 + 8 + 1);
}

TEST_CASE("generator: zero input with zero biases gives zero, shape is preserved") {
    auto [g, d] = init_params<double>(3);
    for (int n : {3, 5, 9}) {
        std::vector<double> zero(8 * n * (n + 1), 0.0);
        const auto out = generator_forward<double>(g, zero, n, n + 1);
        CHECK(out.size() == std::size_t(n * (n + 1)));
        for (double v : out) CHECK(v == 0.0);
    }
    CHECK_THROWS_AS(generator_forward<double>(g, std::vector<double>(8 * 4, 0.0), 2, 2), ShapeError);
    CHECK_THROWS_AS(generator_forward<double>(g, std::vector<double>(7 * 16, 0.0), 4, 4), ShapeError);
}

TEST_CASE("generator: impulse response stays within a 9x9 window") {
    auto [g, d] = random_params(4);
    const int n = 21;
    std::vector<double> zero(8 * n * n, 0.0);
    const auto base = generator_forward<double>(g, zero, n, n);
    for (int lz = 0; lz < 8; ++lz) {
        auto in = zero;
        in[(lz * n + 10) * n + 10] = 1.0;
        const auto out = generator_forward<double>(g, in, n, n);
        bool inside_changed = false;
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                const bool diff = out[y * n + x] != base[y * n + x];
                if (std::abs(x - 10) > 4 || std::abs(y - 10) > 4) CHECK_FALSE(diff);
                else inside_changed = inside_changed || diff;
            }
        CHECK(inside_changed);
    }
}

TEST_CASE("generator: interior is shift equivariant") {
    auto [g, d] = random_params(5);
    const int n = 20;
    const auto in = test::random_vector(8 * n * n, 6);
    std::vector<double> shifted(in.size(), 0.0);
    for (int z = 0; z < 8; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 1; x < n; ++x) shifted[(z * n + y) * n + x] = in[(z * n + y) * n + x - 1];
    const auto a = generator_forward<double>(g, in, n, n);
    const auto b = generator_forward<double>(g, shifted, n, n);
    for (int y = 5; y < n - 5; ++y)
        for (int x = 6; x < n - 5; ++x) CHECK(b[y * n + x] == doctest::Approx(a[y * n + x - 1]).epsilon(1e-12));
}

TEST_CASE("generator gradient matches finite differences") {
    auto [g, d] = random_params(7);
    const int n = 8;
    const auto x = test::random_vector(8 * n * n, 8, 0.0, 1.0);
    const auto u = test::random_vector(n * n, 9);
    GeneratorCache<double> cache;
    generator_forward<double>(g, x, n, n, &cache);
    const auto grad = generator_backward<double>(g, cache, u);
    auto f = [&](const GeneratorParams<double>& p) {
        const auto out = generator_forward<double>(p, x, n, n);
        double s = 0.0;
        for (int i = 0; i < n * n; ++i) s += u[i] * out[i];
        return s;
    };
    const double f0 = f(g);
    const double h = 1e-6;
    int bad = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto pp = g, pm = g;
        pp.values()[i] += h;
        pm.values()[i] -= h;
        const double fd = (f(pp) - f(pm)) / (2 * h);
        if (!test::gradient_close(grad.values()[i], fd, f0, h)) ++bad;
    }
    CHECK(bad == 0);

    double usum = 0.0;
    for (double v : u) usum += v;
    CHECK(grad.conv2d_2_bias()[0] == doctest::Approx(usum).epsilon(1e-12));

    const auto zero_grad = generator_backward<double>(g, cache, std::vector<double>(n * n, 0.0));
    for (double v : zero_grad.values()) CHECK(v == 0.0);
    CHECK_THROWS(generator_backward<double>(g, GeneratorCache<double>{}, u));
    CHECK_THROWS_AS(generator_backward<double>(g, cache, std::vector<double>(5, 0.0)), ShapeError);
}

TEST_CASE("discriminator gradients match finite differences") {
    auto [g, d] = random_params(10);
    const int n = 8;
    const auto s = test::random_vector(n * n, 11, 0.0, 1.0);
    DiscriminatorCache<double> cache;
    discriminator_forward<double>(d, s, n, n, &cache);
    const double up = 0.7;
    DiscriminatorParams<double> grad;
    std::vector<double> in_grad;
    discriminator_backward<double>(d, cache, up, &grad, &in_grad);
    REQUIRE(in_grad.size() == s.size());

    const double h = 1e-6;
    int bad = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        auto pp = d, pm = d;
        pp.values()[i] += h;
        pm.values()[i] -= h;
        const double fd = up * (discriminator_forward<double>(pp, s, n, n) - discriminator_forward<double>(pm, s, n, n)) / (2 * h);
        if (!test::gradient_close(grad.values()[i], fd, up, h)) ++bad;
    }
    CHECK(bad == 0);

    bad = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        auto sp = s, sm = s;
        sp[i] += h;
        sm[i] -= h;
        const double fd = up * (discriminator_forward<double>(d, sp, n, n) - discriminator_forward<double>(d, sm, n, n)) / (2 * h);
        if (!test::gradient_close(in_grad[i], fd, up, h)) ++bad;
    }
    CHECK(bad == 0);

    DiscriminatorParams<double> zg;
    std::vector<double> zi;
    discriminator_backward<double>(d, cache, 0.0, &zg, &zi);
    for (double v : zg.values()) CHECK(v == 0.0);
    for (double v : zi) CHECK(v == 0.0);
}

TEST_CASE("discriminator output range") {
    DiscriminatorParams<double> zero;
    const auto s = test::random_vector(20 * 20, 12);
    CHECK(discriminator_forward<double>(zero, s, 20, 20) == 0.5);
    auto [g, d] = random_params(13);
    for (int n : {3, 12, 17, 40}) {
        const auto x = test::random_vector(n * n, 14 + n, -3.0, 3.0);
        DiscriminatorCache<double> c;
        const double out = discriminator_forward<double>(d, x, n, n, &c);
        CHECK(out > 0.0);
        CHECK(out < 1.0);
        CHECK(c.pooled.size() == 1152);
    }
    CHECK_THROWS_AS(discriminator_forward<double>(d, std::vector<double>(4, 0.0), 2, 2), ShapeError);
}

TEST_CASE("initialisation") {
    const auto [g1, d1] = init_params<float>(42);
    const auto [g2, d2] = init_params<float>(42);
    CHECK(g1 == g2);
    CHECK(d1 == d2);
    const auto [g3, d3] = init_params<float>(43);
    CHECK_FALSE(g1 == g3);

    for (std::size_t t = 1; t < kGeneratorTensors.size(); t += 2)
        for (float v : g1.tensor(t)) CHECK(v == 0.0f);
    for (std::size_t t = 1; t < kDiscriminatorTensors.size(); t += 2)
        for (float v : d1.tensor(t)) CHECK(v == 0.0f);

    // 216 weights per draw, averaged over 50 seeds.
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto p = init_params<double>(seed).first;
        for (double v : p.conv3d_1_weight()) {
            sum += v;
            sq += v * v;
            ++n;
        }
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(var == doctest::Approx(2.0 / 27.0).epsilon(0.2));

    const auto w = init_params<double>(0).first.conv2d_1_weight();
    double s2 = 0.0;
    for (double v : w) s2 += v * v;
    CHECK(s2 / w.size() == doctest::Approx(2.0 / (32 * 9)).epsilon(0.2));
}

TEST_CASE("parameter serialisation round trip and corruption") {
    const auto [g, d] = init_params<float>(9);
    std::stringstream gs, ds;
    write_params(gs, g);
    write_params(ds, d);
    const std::string gblob = gs.str(), dblob = ds.str();
    std::istringstream gi(gblob), di(dblob);
    CHECK(read_generator_params(gi) == g);
    CHECK(read_discriminator_params(di) == d);

    std::istringstream wrong_kind(gblob);
    CHECK_THROWS_AS(read_discriminator_params(wrong_kind), FormatError);
    std::string bad = gblob;
    bad[0] = 'X';
    std::istringstream bm(bad);
    CHECK_THROWS_WITH_AS(read_generator_params(bm), doctest::Contains("magic"), FormatError);
    std::istringstream cut(gblob.substr(0, gblob.size() - 3));
    CHECK_THROWS_AS(read_generator_params(cut), FormatError);

    // Payload after the header is little-endian float32 in field order.
    const float first = g.values()[0];
    unsigned char b[4];
    std::memcpy(b, gblob.data() + gblob.size() - 4 * g.size(), 4);
    float decoded;
    const std::uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t(b[3]) << 24);
    std::memcpy(&decoded, &bits, 4);
    CHECK(decoded == first);
}
}
