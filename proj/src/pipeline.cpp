#include "svct/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "svct/error.hpp"
#include "svct/metrics.hpp"
#include "svct/patching.hpp"
#include "svct/text_config.hpp"

namespace svct {

namespace {

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << v;
    return os.str();
}

std::string filter_name(RampFilter f) { return f == RampFilter::Hann ? "hann" : "ramlak"; }

std::string stage_file(int k) { return "stage_" + std::to_string(k) + ".ckpt"; }

}  // namespace

std::uint64_t stage_seed(std::uint64_t seed, int stage) {
    // splitmix64 finaliser over (seed, stage)
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(stage);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Volume3D initial_reconstruction(const Sinogram& y, const EpConfig& ep, RampFilter filter) {
    const Volume3D init = fdk_reconstruct(y, filter);
    return ep_reconstruct(y, ep, init).volume;
}

Volume3D destreak_volume(const Volume3D& x, const StageCheckpoint& stage) {
    const Dims3 d = x.dims();
    if (d.nx != d.ny) throw ShapeError("destreak: volume must have a square x-y grid");
    const auto subs = extract_subvolumes(x, nn::kGenDepth, d.nx);
    const float s = static_cast<float>(stage.intensity_scale);
    const float inv = static_cast<float>(1.0 / stage.intensity_scale);
    std::vector<Image2D> slices(subs.size());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < static_cast<int>(subs.size()); ++i) {
        std::vector<float> in = subs[i].data;
        for (float& v : in) v *= s;
        auto out = nn::generator_forward<float>(stage.gen, in, d.nx, d.ny);
        for (float& v : out) v *= inv;
        slices[i].nx = d.nx;
        slices[i].ny = d.ny;
        slices[i].data = std::move(out);
    }
    std::map<int, Image2D> by_z;
    for (std::size_t i = 0; i < subs.size(); ++i) by_z.emplace(subs[i].z_center, std::move(slices[i]));
    return aggregate_slices(by_z, d.nz, nn::kGenDepth, x.voxel());
}

PipelineModel train_pipeline(const Volume3D& gt, const Sinogram& y_train, const PipelineConfig& cfg,
                             const ProgressFn& progress) {
    if (cfg.stages < 1) throw Error("train: stages must be >= 1");
    cfg.train.validate();
    const auto& geom = y_train.geometry();
    if (!gt.matches(geom)) throw ShapeError("train: ground truth does not match the sinogram geometry");
    auto say = [&](const std::string& msg) {
        if (progress) progress(msg);
    };

    PipelineModel model;
    model.geometry = geom;
    model.n_views = y_train.n_views();
    model.ep = cfg.ep ? *cfg.ep : default_ep_config(geom, y_train.views());
    model.ep.validate();
    model.dc = cfg.dc;
    model.fdk_filter = cfg.fdk_filter;
    model.seed = cfg.train.seed;

    const Mask3D mask = make_mask(gt, cfg.mask_dilation);
    const float gt_max = *std::max_element(gt.values().begin(), gt.values().end());
    if (!(gt_max > 0)) throw Error("train: ground truth has no positive values");
    const double scale = 1.0 / gt_max;

    Volume3D x = initial_reconstruction(y_train, model.ep, model.fdk_filter);
    model.train_nmae_ep = nmae(gt, x, mask);
    say("ep nmae=" + format_double(model.train_nmae_ep));

    for (int k = 1; k <= cfg.stages; ++k) {
        const auto examples = make_training_examples(x, gt, mask, scale);
        TrainConfig tc = cfg.train;
        tc.seed = stage_seed(cfg.train.seed, k);

        StageCheckpoint ckpt;
        ckpt.stage_index = k;
        ckpt.config = tc;
        ckpt.intensity_scale = scale;
        // Later stages start from the previous stage's networks.
        const bool warm = cfg.warm_start && !model.stages.empty();
        TrainedStage start;
        if (warm) {
            start.gen = model.stages.back().gen;
            start.disc = model.stages.back().disc;
        } else {
            start.gen = nn::init_params<float>(tc.seed).first;
        }
        ckpt.mse_initial = mean_masked_mse(start.gen, examples);
        auto trained = train_stage(examples, tc, warm ? &start : nullptr);
        ckpt.gen = std::move(trained.gen);
        ckpt.disc = std::move(trained.disc);
        ckpt.history = std::move(trained.history);
        ckpt.mse_final = mean_masked_mse(ckpt.gen, examples);

        const Volume3D xg = destreak_volume(x, ckpt);
        x = data_consistency(xg, y_train, model.dc).volume;
        const double e = nmae(gt, x, mask);
        model.train_nmae.push_back(e);
        say("stage " + std::to_string(k) + " mse " + format_double(ckpt.mse_initial) + " -> " +
            format_double(ckpt.mse_final) + ", nmae(x_G)=" + format_double(nmae(gt, xg, mask)) +
            ", nmae(x_k)=" + format_double(e));
        model.stages.push_back(std::move(ckpt));
    }
    return model;
}

Reconstruction reconstruct(const Sinogram& y, const PipelineModel& model, bool keep_intermediates) {
    if (!(y.geometry() == model.geometry)) {
        throw Error("reconstruct: sinogram geometry does not match the checkpoint geometry");
    }
    if (model.stages.empty()) throw Error("reconstruct: no stages");
    for (std::size_t i = 0; i < model.stages.size(); ++i) {
        if (model.stages[i].stage_index != static_cast<int>(i) + 1) {
            throw Error("reconstruct: checkpoints must be ordered 1..K");
        }
    }
    Reconstruction r;
    r.initial = initial_reconstruction(y, model.ep, model.fdk_filter);
    Volume3D x = r.initial;
    for (const auto& stage : model.stages) {
        Volume3D xg = destreak_volume(x, stage);
        auto dc = data_consistency(xg, y, model.dc);
        x = std::move(dc.volume);
        if (keep_intermediates) r.stages.push_back({std::move(xg), x, dc.breakdown});
    }
    r.volume = std::move(x);
    return r;
}

void save_model(const std::filesystem::path& dir, const PipelineModel& model) {
    std::filesystem::create_directories(dir);
    std::string m;
    m += "format=svct-pipeline\n";
    m += "version=1\n";
    m += "stages=" + std::to_string(model.stages.size()) + '\n';
    m += "geometry_hash=" + hex64(model.geometry.hash()) + '\n';
    for (const auto& [k, v] : parse_key_values(model.geometry.to_config())) m += "geometry." + k + '=' + v + '\n';
    m += "views=" + std::to_string(model.n_views) + '\n';
    m += "seed=" + std::to_string(model.seed) + '\n';
    m += "ep.beta=" + format_double(model.ep.beta_ep) + '\n';
    m += "ep.delta=" + format_double(model.ep.delta) + '\n';
    m += "ep.iters=" + std::to_string(model.ep.n_iters) + '\n';
    m += "ep.clamp=" + std::to_string(model.ep.clamp_nonnegative ? 1 : 0) + '\n';
    m += "dc.beta=" + format_double(model.dc.beta) + '\n';
    m += "dc.cg_iters=" + std::to_string(model.dc.n_cg) + '\n';
    m += "dc.clamp=" + std::to_string(model.dc.clamp_nonnegative ? 1 : 0) + '\n';
    m += "fdk_filter=" + filter_name(model.fdk_filter) + '\n';
    m += "train_nmae.ep=" + format_double(model.train_nmae_ep) + '\n';
    for (std::size_t k = 0; k < model.stages.size(); ++k) {
        const auto& s = model.stages[k];
        m += "stage." + std::to_string(k + 1) + ".file=" + stage_file(static_cast<int>(k) + 1) + '\n';
        m += "stage." + std::to_string(k + 1) + ".seed=" + std::to_string(s.config.seed) + '\n';
        if (k < model.train_nmae.size()) {
            m += "train_nmae." + std::to_string(k + 1) + '=' + format_double(model.train_nmae[k]) + '\n';
        }
        save_checkpoint(dir / stage_file(static_cast<int>(k) + 1), s);
    }
    std::ofstream out(dir / "manifest.txt", std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + (dir / "manifest.txt").string());
    out << m;
    if (!out) throw FormatError("write failed for manifest.txt");
}

PipelineModel load_model(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.txt";
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + manifest_path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const auto kv = parse_key_values(ss.str());
    if (require_value(kv, "format") != "svct-pipeline") throw FormatError("manifest: format is not svct-pipeline");
    if (parse_int("version", require_value(kv, "version")) != 1) throw FormatError("manifest: unknown version");

    PipelineModel model;
    std::string geom_text;
    for (const auto& [k, v] : kv) {
        if (k.rfind("geometry.", 0) == 0) geom_text += k.substr(9) + '=' + v + '\n';
    }
    model.geometry = ConeBeamGeometry::parse(geom_text);
    if (require_value(kv, "geometry_hash") != hex64(model.geometry.hash())) {
        throw FormatError("manifest: geometry hash does not match the recorded geometry");
    }
    model.n_views = parse_int("views", require_value(kv, "views"));
    model.seed = static_cast<std::uint64_t>(std::stoull(require_value(kv, "seed")));
    model.ep.beta_ep = parse_double("ep.beta", require_value(kv, "ep.beta"));
    model.ep.delta = parse_double("ep.delta", require_value(kv, "ep.delta"));
    model.ep.n_iters = parse_int("ep.iters", require_value(kv, "ep.iters"));
    model.ep.clamp_nonnegative = parse_int("ep.clamp", require_value(kv, "ep.clamp")) != 0;
    model.ep.validate();
    model.dc.beta = parse_double("dc.beta", require_value(kv, "dc.beta"));
    model.dc.n_cg = parse_int("dc.cg_iters", require_value(kv, "dc.cg_iters"));
    model.dc.clamp_nonnegative = parse_int("dc.clamp", require_value(kv, "dc.clamp")) != 0;
    model.fdk_filter = parse_ramp_filter(require_value(kv, "fdk_filter"));
    if (const auto* v = find_value(kv, "train_nmae.ep")) model.train_nmae_ep = parse_double("train_nmae.ep", *v);

    const int k_stages = parse_int("stages", require_value(kv, "stages"));
    if (k_stages < 1) throw FormatError("manifest: stages must be >= 1");
    for (int k = 1; k <= k_stages; ++k) {
        const std::string prefix = "stage." + std::to_string(k);
        auto ckpt = load_checkpoint(dir / require_value(kv, prefix + ".file"));
        if (ckpt.stage_index != k) throw FormatError("manifest: " + prefix + " holds stage " + std::to_string(ckpt.stage_index));
        model.stages.push_back(std::move(ckpt));
        if (const auto* v = find_value(kv, "train_nmae." + std::to_string(k))) {
            model.train_nmae.push_back(parse_double("train_nmae", *v));
        }
    }
    return model;
}

}  // namespace svct
