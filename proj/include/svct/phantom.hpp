#pragma once

#include <cstdint>
#include <optional>

#include "svct/geometry.hpp"
#include "svct/volume.hpp"

namespace svct {

/// Upper bound of phantom attenuation (per mm).
inline constexpr double kPhantomMaxAttenuation = 0.04;

/// Walnut-like test object: a wrinkled high-attenuation ellipsoidal shell,
/// a thin septum, 2-4 textured kernel lobes and low-attenuation gaps. The
/// object stays inside the middle 3/4 of the grid along z and at least two
/// voxels from every face. Deterministic in `seed`.
Volume3D make_phantom(std::uint64_t seed, const ConeBeamGeometry& geometry);

/// y = A x, optionally with Poisson transmission noise at incident count
/// `dose`: y = -log(Poisson(dose * exp(-Ax)) / dose). Zero counts are
/// clamped to one photon.
Sinogram simulate_sinogram(const Volume3D& volume, const ConeBeamGeometry& geometry, const ViewSet& views,
                           std::uint64_t noise_seed = 0, std::optional<double> dose = std::nullopt);

/// Trilinear resampling of the object scaled by `scale` about the grid
/// centre. Requires 0.5 <= scale <= 1.5 and the scaled support to stay
/// inside the grid.
Volume3D rescale_volume(const Volume3D& volume, double scale);

}  // namespace svct
