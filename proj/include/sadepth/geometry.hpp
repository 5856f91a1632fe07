#pragma once

#include <array>

#include "sadepth/ops.hpp"

namespace sadepth::geometry {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

/// Pixel centers sit at integer coordinates, origin top-left, u = column,
/// v = row. Every module uses this convention.
struct Intrinsics {
    double fx = 1, fy = 1, cx = 0, cy = 0;
    int64_t width = 0, height = 0;

    /// Rescaled copy for a pyramid level: (s*fx, s*fy, s*cx, s*cy).
    Intrinsics scaled(double s) const;
    void validate() const;
};

struct RigidTransform {
    Mat3 rotation{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    Vec3 translation{0, 0, 0};

    static RigidTransform identity() { return RigidTransform{}; }
    void validate() const; // orthonormal rotation, det +1 (1e-6)
};

RigidTransform axis_angle_to_transform(const Vec3& axis_angle, const Vec3& translation);
RigidTransform invert(const RigidTransform& t);
/// compose(a, b): apply b first, then a.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
Vec3 transform_point(const RigidTransform& t, const Vec3& p);

/// Continuous source coordinates per target pixel plus validity flags.
struct SampleGrid {
    Var coords;   // (N, H, W, 2) of (u, v) in pixels
    Tensor valid; // (N, 1, H, W), 1 where the projection is usable
};

/// Floor on transformed depth before the perspective division.
inline constexpr double kZEps = 1e-7;

/// depth (N,1,H,W), all positive -> camera-frame points (N,3,H,W).
Var backproject(const Var& depth, const Intrinsics& k);

/// points (N,3,H,W) through rotation (N,3,3) and translation (N,3), then the
/// pinhole projection. valid is false where the transformed depth is <= kZEps
/// or the projection leaves [0,width-1]x[0,height-1].
SampleGrid project(const Var& points, const Intrinsics& k, const Var& rotation, const Var& translation);
SampleGrid project(const Var& points, const Intrinsics& k, const RigidTransform& t);

/// Bilinear sampling with clamp-to-border; differentiable in image and grid.
Var bilinear_sample(const Var& image, const SampleGrid& grid);

/// Batched Rodrigues map, (N,3) axis-angle -> (N,3,3) rotation matrices.
/// Smooth through zero rotation.
Var rodrigues(const Var& axis_angle);

// Constant Vars holding a fixed transform replicated over a batch.
Var rotation_constant(const RigidTransform& t, int64_t batch);
Var translation_constant(const RigidTransform& t, int64_t batch);

} // namespace sadepth::geometry
