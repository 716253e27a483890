#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "svct/dc_solver.hpp"
#include "svct/ep_recon.hpp"
#include "svct/error.hpp"
#include "svct/experiments.hpp"
#include "svct/fdk.hpp"
#include "svct/file_format.hpp"
#include "svct/metrics.hpp"
#include "svct/parallel.hpp"
#include "svct/phantom.hpp"
#include "svct/pipeline.hpp"
#include "svct/text_config.hpp"

namespace fs = std::filesystem;
using namespace svct;

namespace {

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw FormatError("cannot open " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Preset, then config file, then individual --geom key=value flags.
struct GeometryArgs {
    std::string preset = "desk";
    std::string config;
    std::vector<std::string> overrides;

    void add(CLI::App* app) {
        app->add_option("--preset", preset, "Geometry preset (desk, paper-full)");
        app->add_option("--config", config, "Geometry config file (key=value lines)");
        app->add_option("--geom", overrides, "Geometry override key=value")->allow_extra_args(false);
    }

    ConeBeamGeometry build() const {
        GeometrySpec spec = make_geometry(preset).spec();
        if (!config.empty()) spec = apply_geometry_config(spec, read_text(config));
        for (const auto& o : overrides) spec = apply_geometry_config(spec, o);
        return ConeBeamGeometry(spec);
    }
};

void write_pgm(const fs::path& path, int w, int h, const std::vector<float>& v, float lo, float hi) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "P5\n" << w << ' ' << h << "\n255\n";
    const float span = hi > lo ? hi - lo : 1.0f;
    for (float x : v) {
        const float t = std::clamp((x - lo) / span, 0.0f, 1.0f);
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(t * 255.0f))));
    }
}

void print_rows(const std::vector<SweepRow>& rows, const char* name) {
    std::cout << "# " << name << " nmae nhfen\n";
    for (const auto& r : rows) {
        if (r.skipped) {
            std::cerr << "warning: " << name << ' ' << format_double(r.parameter) << " skipped: " << r.note << '\n';
            std::cout << format_double(r.parameter) << " skipped skipped\n";
        } else {
            std::cout << format_double(r.parameter) << ' ' << format_double(r.nmae) << ' ' << format_double(r.nhfen)
                      << '\n';
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse-view cone-beam CT reconstruction with learned destreaking"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Worker threads (default: all cores)")->check(CLI::NonNegativeNumber);

    // phantom
    auto* phantom = app.add_subcommand("phantom", "Generate a walnut-like phantom");
    std::uint64_t ph_seed = 0;
    std::string ph_out;
    GeometryArgs ph_geom;
    phantom->add_option("--seed", ph_seed, "Phantom seed");
    ph_geom.add(phantom);
    phantom->add_option("-o,--output", ph_out, "Output volume")->required();

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Project a volume into a sparse-view sinogram");
    int sim_views = 8;
    double sim_offset = 0.0;
    std::optional<double> sim_dose;
    std::uint64_t sim_noise_seed = 0;
    std::string sim_in, sim_out;
    GeometryArgs sim_geom;
    simulate->add_option("--views", sim_views, "Number of views")->check(CLI::Range(1, 100000));
    simulate->add_option("--offset", sim_offset, "First view angle in degrees");
    simulate->add_option("--dose", sim_dose, "Incident photons per ray (enables Poisson noise)")
        ->check(CLI::PositiveNumber);
    simulate->add_option("--noise-seed", sim_noise_seed, "Noise seed");
    sim_geom.add(simulate);
    simulate->add_option("-i,--input", sim_in, "Input volume")->required();
    simulate->add_option("-o,--output", sim_out, "Output sinogram")->required();

    // fdk
    auto* fdk = app.add_subcommand("fdk", "FDK reconstruction");
    std::string fdk_in, fdk_out, fdk_filter = "hann";
    fdk->add_option("-i,--input", fdk_in, "Input sinogram")->required();
    fdk->add_option("-o,--output", fdk_out, "Output volume")->required();
    fdk->add_option("--filter", fdk_filter, "Ramp filter: hann or ramlak");

    // ep
    auto* ep = app.add_subcommand("ep", "Edge-preserving iterative reconstruction");
    std::string ep_in, ep_out, ep_init = "fdk";
    std::optional<double> ep_beta, ep_delta;
    int ep_iters = EpConfig{}.n_iters;
    ep->add_option("-i,--input", ep_in, "Input sinogram")->required();
    ep->add_option("-o,--output", ep_out, "Output volume")->required();
    ep->add_option("--init", ep_init, "Initial image: fdk or zero");
    ep->add_option("--beta-ep", ep_beta, "Regularization weight (default: scaled to the system)")
        ->check(CLI::PositiveNumber);
    ep->add_option("--delta", ep_delta, "Hyperbola transition (per mm)")->check(CLI::PositiveNumber);
    ep->add_option("--iters", ep_iters, "Iterations")->check(CLI::Range(1, 100000));

    // dc
    auto* dc = app.add_subcommand("dc", "Data-consistency update of a prior image");
    std::string dc_in, dc_prior, dc_out;
    DcOptions dc_opts;
    bool dc_no_clamp = false;
    dc->add_option("-i,--input", dc_in, "Input sinogram")->required();
    dc->add_option("--prior", dc_prior, "Prior volume x_g")->required();
    dc->add_option("-o,--output", dc_out, "Output volume")->required();
    dc->add_option("--beta", dc_opts.beta, "Prior weight")->check(CLI::PositiveNumber);
    dc->add_option("--cg-iters", dc_opts.n_cg, "CG iterations")->check(CLI::Range(1, 100000));
    dc->add_flag("--no-clamp", dc_no_clamp, "Keep negative values");

    // train
    auto* train = app.add_subcommand("train", "Train the multi-stage pipeline on one volume");
    std::string tr_gt, tr_sino, tr_out;
    PipelineConfig tr_cfg;
    std::optional<double> tr_beta, tr_delta;
    int tr_ep_iters = EpConfig{}.n_iters;
    train->add_option("--gt", tr_gt, "Ground-truth volume")->required();
    train->add_option("--sino", tr_sino, "Measurements of the ground truth")->required();
    train->add_option("-o,--output", tr_out, "Checkpoint directory")->required();
    train->add_option("--stages", tr_cfg.stages, "Number of stages")->check(CLI::Range(1, 100));
    train->add_option("--epochs", tr_cfg.train.epochs, "Epochs per stage")->check(CLI::Range(1, 1000000));
    train->add_option("--batch", tr_cfg.train.batch_size, "Batch size")->check(CLI::Range(1, 1000000));
    train->add_option("--disc-every", tr_cfg.train.disc_every, "Generator updates per discriminator update")
        ->check(CLI::Range(1, 1000000));
    train->add_option("--lr-g", tr_cfg.train.lr_g, "Generator learning rate")->check(CLI::PositiveNumber);
    train->add_option("--lr-d", tr_cfg.train.lr_d, "Discriminator learning rate")->check(CLI::PositiveNumber);
    train->add_option("--seed", tr_cfg.train.seed, "Training seed");
    train->add_option("--beta-ep", tr_beta, "EP regularization weight")->check(CLI::PositiveNumber);
    train->add_option("--delta", tr_delta, "EP hyperbola transition")->check(CLI::PositiveNumber);
    train->add_option("--ep-iters", tr_ep_iters, "EP iterations")->check(CLI::Range(1, 100000));
    train->add_option("--dc-beta", tr_cfg.dc.beta, "Data-consistency prior weight")->check(CLI::PositiveNumber);
    train->add_option("--cg-iters", tr_cfg.dc.n_cg, "Data-consistency CG iterations")->check(CLI::Range(1, 100000));
    train->add_option("--dilate", tr_cfg.mask_dilation, "ROI mask dilation radius")->check(CLI::Range(0, 1000));

    // reconstruct
    auto* recon = app.add_subcommand("reconstruct", "Reconstruct with trained checkpoints");
    std::string rc_sino, rc_ckpt, rc_out, rc_dump;
    recon->add_option("--sino", rc_sino, "Input sinogram")->required();
    recon->add_option("--ckpt", rc_ckpt, "Checkpoint directory")->required();
    recon->add_option("-o,--output", rc_out, "Output volume")->required();
    recon->add_option("--dump-intermediates", rc_dump, "Directory for x_EP and per-stage x_G, x_k");

    // eval
    auto* eval = app.add_subcommand("eval", "Masked NMAE and NHFEN against ground truth");
    std::string ev_gt, ev_recon;
    int ev_dilate = 3;
    bool ev_table = false;
    eval->add_option("--gt", ev_gt, "Ground-truth volume")->required();
    eval->add_option("--recon", ev_recon, "Reconstruction")->required();
    eval->add_option("--dilate", ev_dilate, "Mask dilation radius")->check(CLI::Range(0, 1000));
    eval->add_flag("--table", ev_table, "Also print the per-slice NHFEN table");

    // experiment
    auto* experiment = app.add_subcommand("experiment", "Robustness sweeps");
    experiment->require_subcommand(1);
    auto* rotation = experiment->add_subcommand("rotation", "Rotate the acquisition by each offset");
    auto* scale = experiment->add_subcommand("scale", "Rescale the object by each factor");
    std::string ex_ckpt, ex_gt, ex_offsets = "-22.5:7.5:22.5", ex_scales = "0.7:0.1:1.3";
    SweepOptions ex_opts;
    for (auto* sub : {rotation, scale}) {
        sub->add_option("--ckpt", ex_ckpt, "Checkpoint directory")->required();
        sub->add_option("--gt", ex_gt, "Ground-truth test volume")->required();
        sub->add_option("--views", ex_opts.n_views, "Views (default: as trained)")->check(CLI::Range(1, 100000));
        sub->add_option("--base-offset", ex_opts.base_offset_deg, "Base first-view angle in degrees");
        sub->add_option("--dilate", ex_opts.mask_dilation, "Mask dilation radius")->check(CLI::Range(0, 1000));
    }
    rotation->add_option("--offsets", ex_offsets, "start:step:stop in degrees");
    scale->add_option("--scales", ex_scales, "start:step:stop");

    // slices
    auto* slices = app.add_subcommand("slices", "Export central slices as PGM images");
    std::string sl_in, sl_out;
    slices->add_option("-i,--input", sl_in, "Input volume")->required();
    slices->add_option("-o,--output", sl_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << one_line(e.what()) << '\n';
        return 2;
    }

    try {
        if (threads > 0) set_thread_count(threads);

        if (*phantom) {
            save_volume(ph_out, make_phantom(ph_seed, ph_geom.build()));
        } else if (*simulate) {
            const auto geom = sim_geom.build();
            const auto vol = load_volume(sim_in);
            if (!vol.matches(geom)) throw ShapeError("simulate: volume does not match the geometry");
            save_sinogram(sim_out, simulate_sinogram(vol, geom, view_angles(sim_views, sim_offset), sim_noise_seed,
                                                     sim_dose));
        } else if (*fdk) {
            save_volume(fdk_out, fdk_reconstruct(load_sinogram(fdk_in), parse_ramp_filter(fdk_filter)));
        } else if (*ep) {
            const auto y = load_sinogram(ep_in);
            EpConfig cfg = default_ep_config(y.geometry(), y.views());
            if (ep_beta) cfg.beta_ep = *ep_beta;
            if (ep_delta) cfg.delta = *ep_delta;
            cfg.n_iters = ep_iters;
            Volume3D init;
            if (ep_init == "fdk") init = fdk_reconstruct(y);
            else if (ep_init == "zero") init = Volume3D::zeros(y.geometry());
            else throw Error("ep: --init must be fdk or zero");
            const auto r = ep_reconstruct(y, cfg, init);
            std::cout << "beta_ep=" << format_double(cfg.beta_ep) << "\nobjective_initial="
                      << format_double(r.objective.front()) << "\nobjective_final=" << format_double(r.objective.back())
                      << '\n';
            save_volume(ep_out, r.volume);
        } else if (*dc) {
            dc_opts.clamp_nonnegative = !dc_no_clamp;
            const auto r = data_consistency(load_volume(dc_prior), load_sinogram(dc_in), dc_opts);
            std::cout << "objective_initial=" << format_double(r.objective.front())
                      << "\nobjective_final=" << format_double(r.objective.back())
                      << "\nbreakdown=" << (r.breakdown ? 1 : 0) << '\n';
            if (r.breakdown) std::cerr << "warning: CG breakdown, returned the last good iterate\n";
            save_volume(dc_out, r.volume);
        } else if (*train) {
            const auto gt = load_volume(tr_gt);
            const auto y = load_sinogram(tr_sino);
            EpConfig ep_cfg = default_ep_config(y.geometry(), y.views());
            if (tr_beta) ep_cfg.beta_ep = *tr_beta;
            if (tr_delta) ep_cfg.delta = *tr_delta;
            ep_cfg.n_iters = tr_ep_iters;
            tr_cfg.ep = ep_cfg;
            const auto model = train_pipeline(gt, y, tr_cfg, [](const std::string& m) { std::cerr << m << '\n'; });
            save_model(tr_out, model);
            std::cout << "train_nmae.ep=" << format_double(model.train_nmae_ep) << '\n';
            for (std::size_t k = 0; k < model.train_nmae.size(); ++k) {
                std::cout << "train_nmae." << k + 1 << '=' << format_double(model.train_nmae[k]) << '\n';
            }
        } else if (*recon) {
            const auto model = load_model(rc_ckpt);
            const bool dump = !rc_dump.empty();
            const auto r = reconstruct(load_sinogram(rc_sino), model, dump);
            save_volume(rc_out, r.volume);
            if (dump) {
                fs::create_directories(rc_dump);
                save_volume(fs::path(rc_dump) / "x_ep.svol", r.initial);
                for (std::size_t k = 0; k < r.stages.size(); ++k) {
                    const auto n = std::to_string(k + 1);
                    save_volume(fs::path(rc_dump) / ("stage_" + n + "_xg.svol"), r.stages[k].destreaked);
                    save_volume(fs::path(rc_dump) / ("stage_" + n + "_x.svol"), r.stages[k].consistent);
                }
            }
        } else if (*eval) {
            const auto gt = load_volume(ev_gt);
            const auto x = load_volume(ev_recon);
            const auto mask = make_mask(gt, ev_dilate);
            const auto report = nhfen_report(gt, x, mask);
            std::cout << "nmae=" << format_double(nmae(gt, x, mask)) << "\nnhfen=" << format_double(report.value)
                      << "\nmask_voxels=" << mask.count() << "\nslices_used=" << report.slices_used << '\n';
            if (ev_table) {
                std::cout << "# slice nhfen\n";
                for (std::size_t z = 0; z < report.per_slice.size(); ++z) {
                    if (report.per_slice[z] < 0) std::cout << z << " skipped\n";
                    else std::cout << z << ' ' << format_double(report.per_slice[z]) << '\n';
                }
            }
        } else if (*experiment) {
            const auto model = load_model(ex_ckpt);
            const auto gt = load_volume(ex_gt);
            if (*rotation) print_rows(rotation_sweep(gt, model, parse_range(ex_offsets), ex_opts), "offset_deg");
            else print_rows(scale_sweep(gt, model, parse_range(ex_scales), ex_opts), "scale");
        } else if (*slices) {
            const auto v = load_volume(sl_in);
            const Dims3 d = v.dims();
            const auto [lo_it, hi_it] = std::minmax_element(v.values().begin(), v.values().end());
            const float lo = *lo_it, hi = *hi_it;
            fs::create_directories(sl_out);
            std::vector<float> t(v.slice_data(d.nz / 2), v.slice_data(d.nz / 2) + static_cast<std::size_t>(d.nx) * d.ny);
            write_pgm(fs::path(sl_out) / "transverse.pgm", d.nx, d.ny, t, lo, hi);
            std::vector<float> cor, sag;
            for (int z = d.nz - 1; z >= 0; --z) {
                for (int x = 0; x < d.nx; ++x) cor.push_back(v(x, d.ny / 2, z));
                for (int y = 0; y < d.ny; ++y) sag.push_back(v(d.nx / 2, y, z));
            }
            write_pgm(fs::path(sl_out) / "coronal.pgm", d.nx, d.nz, cor, lo, hi);
            write_pgm(fs::path(sl_out) / "sagittal.pgm", d.ny, d.nz, sag, lo, hi);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << one_line(e.what()) << '\n';
        return 1;
    }
    return 0;
}
