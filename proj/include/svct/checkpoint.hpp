#pragma once

#include <filesystem>
#include <iosfwd>

#include "svct/nn.hpp"
#include "svct/training.hpp"

namespace svct {

/// Trained networks of one pipeline stage plus how they were trained.
struct StageCheckpoint {
    int stage_index = 1;  // 1-based
    nn::GeneratorParams<float> gen;
    nn::DiscriminatorParams<float> disc;
    TrainConfig config;
    TrainHistory history;
    /// Multiplier applied to attenuation before the networks see it.
    double intensity_scale = 1.0;
    /// Mean masked MSE over the training examples before and after training.
    double mse_initial = 0.0;
    double mse_final = 0.0;

    bool operator==(const StageCheckpoint&) const;
};

// "SVCTCKPT", u32 version, u32 header length, key=value header (stage,
// config, losses), then the generator and discriminator parameter blobs.
void write_checkpoint(std::ostream& out, const StageCheckpoint& ckpt);
StageCheckpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const StageCheckpoint& ckpt);
StageCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace svct
