#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "svct/error.hpp"
#include "svct/file_format.hpp"
#include "svct/metrics.hpp"
#include "svct/phantom.hpp"
#include "svct/projector.hpp"
#include "test_util.hpp"

using namespace svct;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("svct_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << s;
}

Volume3D smooth_blob(Dims3 d, double sigma) {
    Volume3D v(d, 1.0);
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x) {
                const double r2 = (x - 0.5 * (d.nx - 1)) * (x - 0.5 * (d.nx - 1)) +
                                  (y - 0.5 * (d.ny - 1)) * (y - 0.5 * (d.ny - 1)) +
                                  (z - 0.5 * (d.nz - 1)) * (z - 0.5 * (d.nz - 1));
                const double val = std::exp(-r2 / (2 * sigma * sigma));
                v(x, y, z) = val > 1e-4 ? static_cast<float>(val) : 0.0f;
            }
    return v;
}

double mass(const Volume3D& v) {
    double s = 0.0;
    for (float x : v.values()) s += x;
    return s;
}

}  // namespace

TEST_SUITE("phantom_io") {
TEST_CASE("phantom is deterministic, bounded and inside the grid") {
    const auto g = make_geometry("desk");
    const auto a = make_phantom(0, g), b = make_phantom(0, g);
    CHECK(a.values() == b.values());
    const Dims3 d = a.dims();
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const auto p = make_phantom(seed, g);
        bool bounded = true, margin = true;
        int zmin = d.nz, zmax = -1;
        for (int z = 0; z < d.nz; ++z)
            for (int y = 0; y < d.ny; ++y)
                for (int x = 0; x < d.nx; ++x) {
                    const float v = p(x, y, z);
                    bounded = bounded && v >= 0.0f && v <= kPhantomMaxAttenuation;
                    if (v == 0.0f) continue;
                    zmin = std::min(zmin, z);
                    zmax = std::max(zmax, z);
                    margin = margin && x >= 2 && y >= 2 && x < d.nx - 2 && y < d.ny - 2;
                }
        CHECK(bounded);
        CHECK(margin);
        CHECK(zmin >= 8);
        CHECK(zmax <= d.nz - 9);
    }
}

TEST_CASE("distinct seeds give different objects") {
    const auto g = make_geometry("desk");
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto a = make_phantom(s, g), b = make_phantom(s + 1, g);
        const double e = nmae(a, b, make_mask(a, 3));
        CHECK_MESSAGE(e > 0.1, "seeds " << s << "," << s + 1 << " nmae " << e);
    }
}

TEST_CASE("noiseless simulation is the forward projection") {
    const auto g = test::small_geometry();
    const auto vol = test::random_volume({8, 8, 8}, 1, 0.0f, 0.04f);
    const auto views = view_angles(4, 10.0);
    CHECK(simulate_sinogram(vol, g, views).values() == forward_project(vol, g, views).values());
}

TEST_CASE("Poisson noise is reproducible and shrinks with dose") {
    const auto g = make_geometry("desk");
    const auto gt = make_phantom(3, g);
    const auto views = view_angles(4, 0.0);
    const auto clean = simulate_sinogram(gt, g, views);
    const auto n1 = simulate_sinogram(gt, g, views, 5, 1e4);
    CHECK(n1.values() == simulate_sinogram(gt, g, views, 5, 1e4).values());
    CHECK_FALSE(n1.values() == simulate_sinogram(gt, g, views, 6, 1e4).values());
    auto noise_std = [&](const Sinogram& s) {
        double sum = 0.0, sq = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            const double e = s.values()[i] - clean.values()[i];
            sum += e;
            sq += e * e;
        }
        const double n = double(s.size());
        return std::sqrt(sq / n - (sum / n) * (sum / n));
    };
    const double hi = noise_std(simulate_sinogram(gt, g, views, 5, 1e5));
    const double lo = noise_std(simulate_sinogram(gt, g, views, 5, 1e4));
    CHECK(hi < lo);
    CHECK_THROWS(simulate_sinogram(gt, g, views, 5, 0.0));
    CHECK_THROWS(simulate_sinogram(gt, g, views, 5, -3.0));
}

TEST_CASE("volume and sinogram files round trip bitwise") {
    const auto dir = temp_dir("io");
    const auto g = make_geometry("desk");
    const auto vol = make_phantom(2, g);
    save_volume(dir / "v.svol", vol);
    const auto back = load_volume(dir / "v.svol");
    CHECK(back.dims() == vol.dims());
    CHECK(back.voxel() == vol.voxel());
    CHECK(back.values() == vol.values());

    const auto sino = simulate_sinogram(vol, g, view_angles(5, 12.5));
    save_sinogram(dir / "s.ssin", sino);
    const auto sb = load_sinogram(dir / "s.ssin");
    CHECK(sb.geometry() == g);
    CHECK(sb.views() == sino.views());
    CHECK(sb.values() == sino.values());

    // A sinogram file is not a volume file.
    CHECK_THROWS_WITH_AS(load_volume(dir / "s.ssin"), doctest::Contains("magic"), FormatError);

    const std::string bytes = read_bytes(dir / "v.svol");
    std::string bad = bytes;
    bad[2] = '?';
    write_bytes(dir / "bad_magic.svol", bad);
    CHECK_THROWS_WITH_AS(load_volume(dir / "bad_magic.svol"), doctest::Contains("magic"), FormatError);

    bad = bytes;
    bad[8] = 7;
    write_bytes(dir / "bad_version.svol", bad);
    CHECK_THROWS_WITH_AS(load_volume(dir / "bad_version.svol"), doctest::Contains("version"), FormatError);

    write_bytes(dir / "short.svol", bytes.substr(0, bytes.size() - 8));
    CHECK_THROWS_WITH_AS(load_volume(dir / "short.svol"), doctest::Contains("payload"), FormatError);

    write_bytes(dir / "tiny.svol", bytes.substr(0, 10));
    CHECK_THROWS_AS(load_volume(dir / "tiny.svol"), FormatError);
    CHECK_THROWS_AS(load_volume(dir / "missing.svol"), FormatError);

    // Little-endian float32 payload at the end of the file.
    const float last = vol.values().back();
    const auto* b = reinterpret_cast<const unsigned char*>(bytes.data() + bytes.size() - 4);
    const std::uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t(b[3]) << 24);
    float decoded;
    std::memcpy(&decoded, &bits, 4);
    CHECK(decoded == last);

    // Headerless import of the same payload.
    write_bytes(dir / "raw.f32", bytes.substr(bytes.size() - 4 * vol.size()));
    CHECK(load_raw_volume(dir / "raw.f32", vol.dims(), vol.voxel()).values() == vol.values());
    CHECK_THROWS(load_raw_volume(dir / "raw.f32", {64, 64, 63}, 1.0));
    fs::remove_all(dir);
}

TEST_CASE("rescaling") {
    const auto g = make_geometry("desk");
    const auto ph = make_phantom(1, g);
    CHECK(rescale_volume(ph, 1.0).values() == ph.values());
    CHECK_THROWS(rescale_volume(ph, 0.4));
    CHECK_THROWS(rescale_volume(ph, 2.0));
    CHECK_THROWS_WITH(rescale_volume(ph, 1.5), doctest::Contains("exceeds the grid"));

    const auto blob = smooth_blob({48, 48, 48}, 4.0);
    const double m0 = mass(blob);
    for (double s : {0.7, 0.8, 1.2, 1.3}) {
        const double m = mass(rescale_volume(blob, s));
        CHECK(m / m0 == doctest::Approx(s * s * s).epsilon(0.02));
    }

    const auto round = rescale_volume(rescale_volume(blob, 0.8), 1.25);
    Mask3D interior{blob.dims(), std::vector<std::uint8_t>(blob.size(), 0)};
    for (std::size_t i = 0; i < blob.size(); ++i) interior.data[i] = blob.values()[i] > 0.05f;
    const double e = nmae(blob, round, interior);
    MESSAGE("0.8 -> 1.25 round-trip nmae " << e);
    CHECK(e <= 0.05);
}
}
