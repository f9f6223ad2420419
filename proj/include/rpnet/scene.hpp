#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "rpnet/camera.hpp"
#include "rpnet/kinematics.hpp"

namespace rpnet {

struct Image {
    int width = 0, height = 0, channels = 0;
    std::vector<float> data; // HWC, values in [0,1]

    Image() = default;
    Image(int w, int h, int c) : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(c), 0.0f) {}

    float& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    float at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

struct Mask {
    int width = 0, height = 0;
    std::vector<std::uint8_t> data; // 0 or 1

    Mask() = default;
    Mask(int w, int h) : width(w), height(h),
        data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {}

    std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }

    double foreground_fraction() const;
};

// Primitive posed in the camera frame.
struct PosedPrimitive {
    bool is_sphere = true;
    Vec3 a;          // sphere center / cylinder start
    Vec3 b;          // cylinder end
    double radius = 0.0;
};

struct RayHit {
    double t = 0.0; // camera-frame depth of the boundary crossing
    Vec3 normal;    // outward unit normal at the hit, camera frame
};

// Camera-frame primitives of the robot at the given configuration.
std::vector<PosedPrimitive> posed_primitives(const CameraModel& camera, const RobotModel& model,
                                             const JointConfig& config);

// Ray from the camera center through direction `dir` (not normalized; t is
// camera-frame depth). Solid intersection test for t > 1e-9.
bool ray_hits(const PosedPrimitive& prim, const Vec3& dir);
std::optional<RayHit> ray_entry(const PosedPrimitive& prim, const Vec3& dir);

// pixel = 1 iff the ray through the pixel center intersects any body
// primitive at positive depth
Mask render_mask(const CameraModel& camera, const RobotModel& model, const JointConfig& config);

struct BackgroundSpec {
    enum class Kind { Flat, Gradient, Noise };

    Kind kind = Kind::Flat;
    std::array<float, 3> color_a{0.5f, 0.5f, 0.5f};
    std::array<float, 3> color_b{0.5f, 0.5f, 0.5f};
    double noise_scale = 8.0; // texture cell size in pixels
    bool vertical = false;    // gradient axis
};

BackgroundSpec random_background(std::uint64_t seed);

Image render_color(const CameraModel& camera, const RobotModel& model, const JointConfig& config,
                   const BackgroundSpec& background, std::uint64_t rng_seed);

struct Sample {
    Image image;
    Mask mask;
    Vec3 base_xyz;                              // camera frame, meters
    std::array<Vec3, kNumJoints> joints_xyz;    // camera frame, meters
    RobotType robot_type = RobotType::UR5;
    CameraModel camera;
    JointConfig config;
    double fg_fraction = 0.0;
    bool empty_mask = false;
};

struct MakeSampleOptions {
    double calib_sigma_t = 0.0026; // 0 disables label noise
    CalibrationNoise calib_noise;
    // By default the perturbation is derived from the sample seed; a recording
    // that was calibrated once can pin a shared seed here instead.
    std::optional<std::uint64_t> calib_seed;
};

// Renders image and mask with the true camera pose; labels go through the
// (optionally perturbed) pose, mimicking hand-eye calibration error.
Sample make_sample(const RobotModel& model, const JointConfig& config, const CameraModel& camera,
                   const BackgroundSpec& background, std::uint64_t seed,
                   const MakeSampleOptions& options = {});

} // namespace rpnet
