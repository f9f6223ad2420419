#pragma once

#include <cstdint>
#include <optional>

#include "rpnet/geometry.hpp"

namespace rpnet {

// Pinhole camera. `pose` maps base-frame points into the camera frame
// (x right, y down, z forward); pixel centers sit at integer coordinates.
struct CameraModel {
    double fx = 0.0, fy = 0.0;
    double cx = 0.0, cy = 0.0;
    int width = 0, height = 0;
    FramePose pose;

    void validate() const; // throws std::invalid_argument
};

// Default intrinsics for a given resolution, scaled from a 512x424
// Kinect-like base (fx = fy = 368 at 512 px width, principal point centered).
CameraModel default_camera(int width, int height);

struct ProjectedPoint {
    double u = 0.0;
    double v = 0.0;
    double depth = 0.0;
};

// Returns nullopt when the point lands at or behind the camera plane.
std::optional<ProjectedPoint> project_point(const CameraModel& camera, const Vec3& point_base);

// Camera position sampled on a spherical shell around the robot base,
// oriented to look at a jittered point near the workspace center.
// Deterministic per seed.
struct CameraPoseParams {
    double min_distance = 1.0; // meters
    double max_distance = 3.0;
    double min_elevation = 0.08; // radians above the base plane
    double max_elevation = 1.00;
    Vec3 look_at_center{0.0, 0.0, 0.25};
    double look_at_jitter = 0.12; // meters, uniform in a ball
};

FramePose sample_camera_pose(std::uint64_t seed, double workspace_radius,
                             const CameraPoseParams& params = {});

// Hand-eye style label noise: translation perturbed by zero-mean Gaussian
// noise (sigma_t per axis) truncated to max_shift, rotation by a random
// axis-angle rotation truncated to max_angle. Deterministic per seed.
struct CalibrationNoise {
    double sigma_t = 0.0026;    // meters
    double max_shift = 0.0052;  // meters
    double sigma_r = 0.004;     // radians
    double max_angle = 0.008726646259971648; // radians (0.5 degrees)
};

FramePose perturb_calibration(const FramePose& pose, double sigma_t, std::uint64_t seed,
                              const CalibrationNoise& noise = {});

} // namespace rpnet
