#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "svct/pipeline.hpp"

namespace svct {

/// "start:step:stop", inclusive of stop when step divides the span. A single
/// number is a one-element range.
std::vector<double> parse_range(std::string_view text);

struct SweepRow {
    double parameter = 0.0;  // offset in degrees, or scale
    bool skipped = false;
    std::string note;
    double nmae = 0.0;
    double nhfen = 0.0;
};

struct SweepOptions {
    int n_views = 0;  // 0: the number of views the model was trained with
    double base_offset_deg = 0.0;
    int mask_dilation = 3;
    std::optional<double> dose;
    std::uint64_t noise_seed = 0;
};

/// Views rotated by each offset relative to the base acquisition, which is
/// the same as rotating the object about the z axis.
std::vector<SweepRow> rotation_sweep(const Volume3D& gt, const PipelineModel& model,
                                     const std::vector<double>& offsets_deg, const SweepOptions& options = {});

/// Object rescaled about the isocenter. Scales whose object leaves the grid
/// are reported as skipped.
std::vector<SweepRow> scale_sweep(const Volume3D& gt, const PipelineModel& model, const std::vector<double>& scales,
                                  const SweepOptions& options = {});

}  // namespace svct
