// End-to-end acceptance run on the desk preset. Prints one PASS/FAIL line
// per criterion and exits nonzero if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "oracles.hpp"
#include "svct/dc_solver.hpp"
#include "svct/ep_recon.hpp"
#include "svct/experiments.hpp"
#include "svct/fdk.hpp"
#include "svct/file_format.hpp"
#include "svct/metrics.hpp"
#include "svct/patching.hpp"
#include "svct/phantom.hpp"
#include "svct/pipeline.hpp"
#include "svct/training.hpp"
#include "test_util.hpp"

using namespace svct;
namespace fs = std::filesystem;

namespace {

constexpr int kHeldOut[] = {1, 2, 3};

std::map<int, bool> g_results;

void report(int criterion, bool pass, const std::string& detail) {
    g_results[criterion] = pass;
    std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
}

void note(const std::string& s) {
    std::printf("  %s\n", s.c_str());
    std::fflush(stdout);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// ---------------------------------------------------------------- 1
void adjoint_identity() {
    const auto g = make_geometry("desk");
    const ConeBeamProjector p(g, view_angles(8, 0.0));
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto x = test::random_vector(p.volume_size(), 1000 + s);
        const auto y = test::random_vector(p.sinogram_size(), 2000 + s);
        const double lhs = dot(p.forward(x), y);
        const double rhs = dot(x, p.back(y));
        worst = std::max(worst, std::abs(lhs - rhs) / std::abs(lhs));
    }
    report(1, worst <= 1e-6, "worst relative adjoint mismatch " + sci(worst) + " over 20 pairs");
}

// ---------------------------------------------------------------- 2
template <typename Params, typename F>
int count_bad(const Params& p, const Params& grad, F f) {
    const double h = 1e-6;
    const double f0 = f(p);
    int bad = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        auto pp = p, pm = p;
        pp.values()[i] += h;
        pm.values()[i] -= h;
        if (!test::gradient_close(grad.values()[i], (f(pp) - f(pm)) / (2 * h), f0, h)) ++bad;
    }
    return bad;
}

template <typename P>
void randomise_biases(P& p, std::uint64_t seed) {
    const auto r = test::random_vector(p.size(), seed, -0.05, 0.05);
    for (std::size_t t = 1; t < P::tensors().size(); t += 2) {
        auto b = p.tensor(t);
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = r[i];
    }
}

void gradient_oracles() {
    const auto t0 = std::chrono::steady_clock::now();
    auto [g, d] = nn::init_params<double>(21);
    randomise_biases(g, 22);
    randomise_biases(d, 23);
    const int n = 8;
    const auto x = test::random_vector(8 * n * n, 24, 0.0, 1.0);
    const auto u = test::random_vector(n * n, 25);
    std::vector<std::string> failures;

    nn::GeneratorCache<double> gc;
    nn::generator_forward<double>(g, x, n, n, &gc);
    const auto gg = nn::generator_backward<double>(g, gc, u);
    const int bad_g = count_bad(g, gg, [&](const nn::GeneratorParams<double>& p) {
        const auto out = nn::generator_forward<double>(p, x, n, n);
        double s = 0.0;
        for (int i = 0; i < n * n; ++i) s += u[i] * out[i];
        return s;
    });
    if (bad_g) failures.push_back("generator " + std::to_string(bad_g));

    const auto slice = test::random_vector(n * n, 26, 0.0, 1.0);
    nn::DiscriminatorCache<double> dc;
    nn::discriminator_forward<double>(d, slice, n, n, &dc);
    nn::DiscriminatorParams<double> dg;
    std::vector<double> din;
    nn::discriminator_backward<double>(d, dc, 1.0, &dg, &din);
    const int bad_d = count_bad(d, dg, [&](const nn::DiscriminatorParams<double>& p) {
        return nn::discriminator_forward<double>(p, slice, n, n);
    });
    if (bad_d) failures.push_back("discriminator " + std::to_string(bad_d));

    TrainingExample<double> ex;
    ex.nx = ex.ny = n;
    ex.input = x;
    ex.target = test::random_vector(n * n, 27, 0.0, 1.0);
    ex.roi = RoiMask2D{n, n, std::vector<std::uint8_t>(n * n, 1)};
    const std::vector<TrainingExample<double>> batch{ex};
    const auto gl = generator_loss<double>(g, d, batch);
    const int bad_gl = count_bad(g, gl.grad, [&](const nn::GeneratorParams<double>& p) {
        return generator_loss<double>(p, d, batch).loss;
    });
    if (bad_gl) failures.push_back("generator_loss " + std::to_string(bad_gl));
    const auto dl = discriminator_loss<double>(d, g, batch);
    const int bad_dl = count_bad(d, dl.grad, [&](const nn::DiscriminatorParams<double>& p) {
        return discriminator_loss<double>(p, g, batch).loss;
    });
    if (bad_dl) failures.push_back("discriminator_loss " + std::to_string(bad_dl));

    const auto geo = test::small_geometry();
    const ConeBeamProjector proj(geo, view_angles(5, 0.0));
    EpConfig cfg;
    cfg.beta_ep = 2.0;
    cfg.delta = 0.05;
    const auto xv = test::random_vector(proj.volume_size(), 28, 0.0, 0.2);
    const auto yv = test::random_vector(proj.sinogram_size(), 29, 0.0, 2.0);
    const auto eg = ep_gradient(proj, xv, yv, cfg);
    const double f0 = ep_objective(proj, xv, yv, cfg);
    const double h = 1e-6;
    int bad_ep = 0;
    for (std::size_t i = 0; i < xv.size(); ++i) {
        auto xp = xv, xm = xv;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (ep_objective(proj, xp, yv, cfg) - ep_objective(proj, xm, yv, cfg)) / (2 * h);
        if (!test::gradient_close(eg[i], fd, f0, h)) ++bad_ep;
    }
    if (bad_ep) failures.push_back("ep_gradient " + std::to_string(bad_ep));

    std::string detail = "generator, discriminator, both losses and ep_gradient vs central differences";
    if (!failures.empty()) {
        detail += "; mismatched entries:";
        for (const auto& f : failures) detail += " " + f;
    }
    report(2, failures.empty(), detail + " (" + fmt(seconds_since(t0)) + " s)");
}

// ---------------------------------------------------------------- 3
void metric_oracles() {
    const Dims3 d{8, 8, 8};
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto gt = test::random_volume(d, 300 + s, 0.0f, 0.04f);
        const auto x = test::random_volume(d, 400 + s, 0.0f, 0.04f);
        Mask3D m{d, std::vector<std::uint8_t>(d.count())};
        const auto r = test::random_vector(d.count(), 500 + s, 0.0, 1.0);
        for (std::size_t i = 0; i < r.size(); ++i) m.data[i] = r[i] < 0.7;
        const double a = nmae(gt, x, m), b = test::naive_nmae(gt, x, m);
        const double c = nhfen(gt, x, m), e = test::naive_nhfen(gt, x, m);
        worst = std::max({worst, std::abs(a - b) / b, std::abs(c - e) / e});
    }
    const bool lambda_ok = lambda_schedule(1.0) == 1.0 && lambda_schedule(0.038) == 0.01 &&
                           lambda_schedule(250.0) == 100.0 && lambda_schedule(1e-9) == 1e-8;
    report(3, worst <= 1e-10 && lambda_ok,
           "worst metric oracle deviation " + sci(worst) + ", lambda schedule " + (lambda_ok ? "exact" : "wrong"));
}

// ---------------------------------------------------------------- 4
double rel_diff(std::span<const double> a, std::span<const double> b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num / den);
}

void dc_solver_checks() {
    const auto small = test::small_geometry();
    const ConeBeamProjector p(small, view_angles(5, 0.0));
    const int n = static_cast<int>(p.volume_size()), m = static_cast<int>(p.sinogram_size());

    const auto xg = test::random_vector(n, 41, 0.0, 0.05);
    const double fixed = rel_diff(solve_data_consistency(p, p.forward(xg), xg, 1.0, 50).x, xg);

    Eigen::MatrixXd A(m, n);
    std::vector<double> e(n, 0.0);
    for (int j = 0; j < n; ++j) {
        e[j] = 1.0;
        const auto col = p.forward(e);
        for (int i = 0; i < m; ++i) A(i, j) = col[i];
        e[j] = 0.0;
    }
    const auto y = test::random_vector(m, 42, 0.0, 1.0);
    Eigen::MatrixXd N = A.transpose() * A;
    N.diagonal().array() += 1.0;
    const Eigen::VectorXd rhs = A.transpose() * Eigen::Map<const Eigen::VectorXd>(y.data(), m) +
                                Eigen::Map<const Eigen::VectorXd>(xg.data(), n);
    const Eigen::VectorXd direct = N.ldlt().solve(rhs);
    const double dense = rel_diff(solve_data_consistency(p, y, xg, 1.0, n).x,
                                  std::vector<double>(direct.data(), direct.data() + n));

    const auto g = make_geometry("desk");
    const auto gt = make_phantom(1, g);
    const auto sino = simulate_sinogram(gt, g, view_angles(8, 0.0));
    const auto out = data_consistency(fdk_reconstruct(sino), sino, DcOptions{});
    bool monotone = out.objective.size() == 51;
    for (std::size_t k = 1; k < out.objective.size(); ++k) {
        monotone = monotone && out.objective[k] <= out.objective[k - 1] * (1 + 1e-10);
    }
    report(4, fixed <= 1e-6 && dense <= 1e-5 && monotone,
           "(a) fixed point " + sci(fixed) + ", (b) dense solve " + sci(dense) +
               ", (c) objective non-increasing over 50 iterations: " + (monotone ? "yes" : "no"));
}

// ---------------------------------------------------------------- 5
void patching_round_trip() {
    const auto vol = make_phantom(0, make_geometry("desk"));
    Volume3D noisy = vol;
    const auto r = test::random_floats(vol.size(), 51, 0.001f, 0.01f);
    for (std::size_t i = 0; i < vol.size(); ++i) noisy.values()[i] += r[i];
    std::map<int, Image2D> slices;
    for (const auto& s : extract_subvolumes(noisy, 8, 64)) slices.emplace(s.z_center, central_slice(s));
    const auto out = aggregate_slices(slices, 64, 8, noisy.voxel());
    bool ok = slices.size() == 56;
    for (int z = 0; z < 64; ++z) {
        const bool interior = z >= 4 && z <= 59;
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) ok = ok && out(x, y, z) == (interior ? noisy(x, y, z) : 0.0f);
    }
    report(5, ok, "56 centres, interior slices bitwise equal, slices 0-3 and 60-63 zero");
}

// ---------------------------------------------------------------- 6-11
struct HeldOutRun {
    double fdk = 0, ep = 0, cnn = 0, proposed = 0;
    std::vector<double> stage_nmae;  // post-DC, per stage
    std::vector<double> stage_xg;    // before DC, per stage
};

HeldOutRun evaluate(const PipelineModel& model, int seed, int views) {
    const auto g = model.geometry;
    const auto gt = make_phantom(seed, g);
    const auto mask = make_mask(gt, 3);
    const auto y = simulate_sinogram(gt, g, view_angles(views, 0.0));
    HeldOutRun r;
    r.fdk = nmae(gt, fdk_reconstruct(y, model.fdk_filter), mask);
    const auto rec = reconstruct(y, model, true);
    r.ep = nmae(gt, rec.initial, mask);
    for (const auto& s : rec.stages) {
        r.stage_xg.push_back(nmae(gt, s.destreaked, mask));
        r.stage_nmae.push_back(nmae(gt, s.consistent, mask));
    }
    r.cnn = r.stage_xg.front();
    r.proposed = nmae(gt, rec.volume, mask);
    return r;
}

PipelineModel train_desk(int views) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto g = make_geometry("desk");
    const auto gt = make_phantom(0, g);
    const auto y = simulate_sinogram(gt, g, view_angles(views, 0.0));
    PipelineConfig cfg;
    cfg.train.seed = 0;
    auto model = train_pipeline(gt, y, cfg, [&](const std::string& m) { note(std::to_string(views) + " views: " + m); });
    note(std::to_string(views) + "-view training took " + fmt(seconds_since(t0)) + " s");
    return model;
}

}  // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    adjoint_identity();
    gradient_oracles();
    metric_oracles();
    dc_solver_checks();
    patching_round_trip();

    const auto model8 = train_desk(8);
    std::map<int, HeldOutRun> run8;
    for (int s : kHeldOut) {
        run8[s] = evaluate(model8, s, 8);
        const auto& r = run8[s];
        std::string stages;
        for (std::size_t k = 0; k < r.stage_nmae.size(); ++k) {
            stages += " x_G" + std::to_string(k + 1) + "=" + fmt(r.stage_xg[k]) + " x_" + std::to_string(k + 1) + "=" +
                      fmt(r.stage_nmae[k]);
        }
        note("seed " + std::to_string(s) + " 8 views: fdk=" + fmt(r.fdk) + " ep=" + fmt(r.ep) + " cnn=" + fmt(r.cnn) +
             " proposed=" + fmt(r.proposed) + " |" + stages);
    }

    {
        bool strict = true;
        int middle = 0;
        for (int s : kHeldOut) {
            const auto& r = run8[s];
            strict = strict && r.proposed < r.cnn && r.proposed < r.ep && r.ep < r.fdk;
            if (r.cnn < r.ep) ++middle;
        }
        const int n = static_cast<int>(std::size(kHeldOut));
        report(6, strict && 2 * middle > n,
               "proposed < EP < FDK on every phantom: " + std::string(strict ? "yes" : "no") + "; CNN < EP on " +
                   std::to_string(middle) + "/" + std::to_string(n));
    }
    {
        bool ok = true;
        double worst_ratio = -1.0;
        for (int s : kHeldOut) {
            const auto& v = run8[s].stage_nmae;
            for (std::size_t k = 1; k < v.size(); ++k) {
                const double ratio = v[k] / v[k - 1] - 1.0;
                if (ratio > worst_ratio) worst_ratio = ratio;
                ok = ok && v[k] <= v[k - 1] * 1.02;
            }
        }
        report(7, ok, "largest stage-to-stage relative change " + fmt(100 * worst_ratio) + "% (limit +2%)");
    }
    {
        bool ok = true;
        std::string detail;
        for (int s : kHeldOut) {
            const auto& r = run8[s];
            ok = ok && r.stage_nmae[0] <= r.stage_xg[0];
            detail += " seed " + std::to_string(s) + ": " + fmt(r.stage_xg[0]) + " -> " + fmt(r.stage_nmae[0]);
        }
        report(8, ok, "stage-1 NMAE before -> after data consistency:" + detail);
    }

    {
        const auto model4 = train_desk(4);
        bool ok = true;
        std::string detail;
        for (int s : kHeldOut) {
            const auto r4 = evaluate(model4, s, 4);
            ok = ok && r4.proposed > run8[s].proposed;
            detail += " seed " + std::to_string(s) + ": " + fmt(r4.proposed) + " vs " + fmt(run8[s].proposed);
        }
        report(9, ok, "proposed NMAE 4 views vs 8 views:" + detail);
    }

    {
        const auto t1 = std::chrono::steady_clock::now();
        const auto gt = make_phantom(kHeldOut[0], model8.geometry);
        const auto rows = rotation_sweep(gt, model8, parse_range("-22.5:7.5:22.5"));
        double at_zero = -1.0;
        for (const auto& r : rows)
            if (r.parameter == 0.0) at_zero = r.nmae;
        bool ok = rows.size() == 7 && at_zero > 0.0;
        std::string detail;
        for (const auto& r : rows) {
            ok = ok && !r.skipped && std::abs(r.nmae - at_zero) <= 0.25 * at_zero;
            detail += " " + fmt(r.parameter) + ":" + fmt(r.nmae);
        }
        report(10, ok, "offset:NMAE" + detail + " (band +-25% of the 0 deg value, " + fmt(seconds_since(t1)) + " s)");
    }

    {
        // Second full training run with the same seed, saved and reloaded.
        const auto base = fs::temp_directory_path() / "svct_acceptance";
        fs::remove_all(base);
        const auto again = train_desk(8);
        save_model(base / "a", model8);
        save_model(base / "b", again);
        bool same = true;
        for (const auto& entry : fs::directory_iterator(base / "a")) {
            same = same && read_bytes(entry.path()) == read_bytes(base / "b" / entry.path().filename());
        }
        const auto g = model8.geometry;
        const auto y = simulate_sinogram(make_phantom(kHeldOut[0], g), g, view_angles(8, 0.0));
        save_volume(base / "a.svol", reconstruct(y, model8).volume);
        save_volume(base / "b.svol", reconstruct(y, load_model(base / "b")).volume);
        const bool recon_same = read_bytes(base / "a.svol") == read_bytes(base / "b.svol");
        fs::remove_all(base);
        report(11, same && recon_same,
               std::string("checkpoint files ") + (same ? "identical" : "differ") + ", reconstructions " +
                   (recon_same ? "identical" : "differ"));
    }

    int failed = 0;
    for (const auto& [k, ok] : g_results) failed += ok ? 0 : 1;
    std::printf("%d of %zu criteria passed (%.0f s)\n", static_cast<int>(g_results.size()) - failed, g_results.size(),
                seconds_since(t0));
    return failed == 0 ? 0 : 1;
}
