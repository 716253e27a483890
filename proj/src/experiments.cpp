#include "svct/experiments.hpp"

#include <cmath>
#include <string>

#include "svct/error.hpp"
#include "svct/metrics.hpp"
#include "svct/phantom.hpp"
#include "svct/text_config.hpp"

namespace svct {

std::vector<double> parse_range(std::string_view text) {
    const auto c1 = text.find(':');
    if (c1 == std::string_view::npos) return {parse_double("range", text)};
    const auto c2 = text.find(':', c1 + 1);
    if (c2 == std::string_view::npos || text.find(':', c2 + 1) != std::string_view::npos) {
        throw Error("range: expected start:step:stop, got '" + std::string(text) + "'");
    }
    const double start = parse_double("range start", text.substr(0, c1));
    const double step = parse_double("range step", text.substr(c1 + 1, c2 - c1 - 1));
    const double stop = parse_double("range stop", text.substr(c2 + 1));
    if (!(step > 0)) throw Error("range: step must be > 0");
    if (stop < start) throw Error("range: stop must be >= start");
    const double span = (stop - start) / step;
    const long long n = static_cast<long long>(std::floor(span + 1e-9));
    if (n > 100000) throw Error("range: too many values");
    std::vector<double> out;
    for (long long i = 0; i <= n; ++i) out.push_back(start + static_cast<double>(i) * step);
    return out;
}

namespace {

SweepRow evaluate(const Volume3D& gt, const PipelineModel& model, const ViewSet& views, int dilation,
                  const SweepOptions& o) {
    const Sinogram y = simulate_sinogram(gt, model.geometry, views, o.noise_seed, o.dose);
    const Volume3D x = reconstruct(y, model).volume;
    const Mask3D mask = make_mask(gt, dilation);
    SweepRow row;
    row.nmae = nmae(gt, x, mask);
    row.nhfen = nhfen(gt, x, mask);
    return row;
}

int views_of(const PipelineModel& model, const SweepOptions& o) {
    const int n = o.n_views > 0 ? o.n_views : model.n_views;
    if (n < 1) throw Error("experiment: number of views must be >= 1");
    return n;
}

}  // namespace

std::vector<SweepRow> rotation_sweep(const Volume3D& gt, const PipelineModel& model,
                                     const std::vector<double>& offsets_deg, const SweepOptions& options) {
    if (!gt.matches(model.geometry)) throw ShapeError("experiment: volume does not match the checkpoint geometry");
    std::vector<SweepRow> rows;
    for (double off : offsets_deg) {
        auto row = evaluate(gt, model, view_angles(views_of(model, options), options.base_offset_deg + off),
                            options.mask_dilation, options);
        row.parameter = off;
        rows.push_back(row);
    }
    return rows;
}

std::vector<SweepRow> scale_sweep(const Volume3D& gt, const PipelineModel& model, const std::vector<double>& scales,
                                  const SweepOptions& options) {
    if (!gt.matches(model.geometry)) throw ShapeError("experiment: volume does not match the checkpoint geometry");
    const ViewSet views = view_angles(views_of(model, options), options.base_offset_deg);
    std::vector<SweepRow> rows;
    for (double s : scales) {
        SweepRow row;
        std::optional<Volume3D> scaled;
        try {
            scaled = rescale_volume(gt, s);
        } catch (const Error& e) {
            row.parameter = s;
            row.skipped = true;
            row.note = e.what();
            rows.push_back(row);
            continue;
        }
        row = evaluate(*scaled, model, views, options.mask_dilation, options);
        row.parameter = s;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace svct
