#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace svct {

/// Raw geometry fields, lengths in millimetres. Validated by ConeBeamGeometry.
struct GeometrySpec {
    double dso = 0.0;        // source to isocenter
    double dsd = 0.0;        // source to detector
    int det_rows = 0;
    int det_cols = 0;
    double det_pixel = 0.0;  // square detector pitch
    int vol_nx = 0;
    int vol_ny = 0;
    int vol_nz = 0;
    double voxel = 0.0;      // cubic voxel pitch
    // Skips the magnified-footprint check. Only the paper-full preset sets
    // it: its 501-voxel grid overhangs the 60 mm detector even though the
    // imaged object does not.
    bool allow_truncated_grid = false;
};

/// Circular-orbit, flat-detector cone-beam geometry. The orbit lies in the
/// z = 0 plane; the detector center sits dsd - dso beyond the isocenter,
/// opposite the source, with its plane orthogonal to the central ray.
/// Immutable once constructed.
class ConeBeamGeometry {
public:
    /// Throws svct::Error naming the first violated constraint.
    explicit ConeBeamGeometry(const GeometrySpec& spec);

    double dso() const { return spec_.dso; }
    double dsd() const { return spec_.dsd; }
    int det_rows() const { return spec_.det_rows; }
    int det_cols() const { return spec_.det_cols; }
    double det_pixel() const { return spec_.det_pixel; }
    int vol_nx() const { return spec_.vol_nx; }
    int vol_ny() const { return spec_.vol_ny; }
    int vol_nz() const { return spec_.vol_nz; }
    double voxel() const { return spec_.voxel; }
    const GeometrySpec& spec() const { return spec_; }

    /// Central-ray magnification dsd / dso.
    double magnification() const { return spec_.dsd / spec_.dso; }

    std::size_t volume_size() const;
    std::size_t detector_size() const;

    /// Key-value text ("key=value" per line) that round-trips through parse().
    std::string to_config() const;
    static ConeBeamGeometry parse(std::string_view text);

    /// FNV-1a of to_config(); identifies the geometry in checkpoint manifests.
    std::uint64_t hash() const;

    bool operator==(const ConeBeamGeometry& other) const;

private:
    GeometrySpec spec_;
};

/// Named presets: "paper-full" (501^3 volume, 150x150 detector) and "desk"
/// (64^3 volume, 48x48 detector).
ConeBeamGeometry make_geometry(std::string_view preset);
ConeBeamGeometry make_geometry(const GeometrySpec& spec);

/// Applies `key=value` overrides on top of a spec. Unknown keys are an error.
GeometrySpec apply_geometry_config(GeometrySpec base, std::string_view text);

/// Ordered source angles in radians, strictly increasing within
/// [offset, offset + 2*pi).
struct ViewSet {
    std::vector<double> angles;

    std::size_t size() const { return angles.size(); }
    bool operator==(const ViewSet&) const = default;
};

/// n_views angles equally spaced over 360 degrees, starting at offset_deg.
ViewSet view_angles(int n_views, double offset_deg);

/// Source location in isocenter coordinates (mm) for the given angle.
std::array<double, 3> source_position(const ConeBeamGeometry& geometry, double angle);

}  // namespace svct
