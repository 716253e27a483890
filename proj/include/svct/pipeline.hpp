#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "svct/checkpoint.hpp"
#include "svct/dc_solver.hpp"
#include "svct/ep_recon.hpp"
#include "svct/fdk.hpp"
#include "svct/geometry.hpp"
#include "svct/volume.hpp"

namespace svct {

struct PipelineConfig {
    int stages = 4;
    TrainConfig train;
    /// Unset: default_ep_config for the training acquisition.
    std::optional<EpConfig> ep;
    DcOptions dc;
    RampFilter fdk_filter = RampFilter::Hann;
    int mask_dilation = 3;
    /// Initialise stage k > 1 from the trained stage k - 1 networks.
    bool warm_start = true;
};

/// Everything inference needs: the acquisition the stages were trained for,
/// the fixed EP and DC settings, and the per-stage networks.
struct PipelineModel {
    ConeBeamGeometry geometry = make_geometry("desk");
    int n_views = 0;
    EpConfig ep;
    DcOptions dc;
    RampFilter fdk_filter = RampFilter::Hann;
    std::uint64_t seed = 0;
    std::vector<StageCheckpoint> stages;
    /// Training-volume NMAE of x_EP and of each post-DC stage output.
    double train_nmae_ep = 0.0;
    std::vector<double> train_nmae;
};

/// Seed for stage k (1-based) derived from the run seed.
std::uint64_t stage_seed(std::uint64_t seed, int stage);

using ProgressFn = std::function<void(const std::string&)>;

/// Greedy stage-wise training on one volume and its measurements.
PipelineModel train_pipeline(const Volume3D& gt, const Sinogram& y_train, const PipelineConfig& cfg,
                             const ProgressFn& progress = {});

/// x_EP from the measurements: FDK initialisation, then EP iterations.
Volume3D initial_reconstruction(const Sinogram& y, const EpConfig& ep, RampFilter filter);

/// Runs G on every valid-centre subvolume of x and aggregates the central
/// slices. Boundary slices outside the valid range are zero.
Volume3D destreak_volume(const Volume3D& x, const StageCheckpoint& stage);

struct StageOutput {
    Volume3D destreaked;  // x_G, before data consistency
    Volume3D consistent;  // x_k
    bool dc_breakdown = false;
};

struct Reconstruction {
    Volume3D volume;                  // x_K
    Volume3D initial;                 // x_EP
    std::vector<StageOutput> stages;  // filled only with intermediates requested
};

Reconstruction reconstruct(const Sinogram& y, const PipelineModel& model, bool keep_intermediates = false);

/// Checkpoint directory: manifest.txt plus stage_<k>.ckpt per stage.
void save_model(const std::filesystem::path& dir, const PipelineModel& model);
PipelineModel load_model(const std::filesystem::path& dir);

}  // namespace svct
