#include "rpnet/camera.hpp"

#include <cmath>
#include <stdexcept>

#include "rpnet/rng.hpp"

namespace rpnet {

void CameraModel::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("focal lengths must be positive");
    if (width <= 0 || height <= 0) throw std::invalid_argument("image size must be positive");
    if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height) {
        throw std::invalid_argument("principal point outside image");
    }
    if (pose.orthonormality_error() > 1e-9) {
        throw std::invalid_argument("camera pose rotation is not orthonormal");
    }
}

CameraModel default_camera(int width, int height) {
    CameraModel cam;
    cam.width = width;
    cam.height = height;
    cam.fx = cam.fy = 368.0 * static_cast<double>(width) / 512.0;
    cam.cx = 0.5 * static_cast<double>(width);
    cam.cy = 0.5 * static_cast<double>(height);
    cam.pose = FramePose::identity();
    return cam;
}

std::optional<ProjectedPoint> project_point(const CameraModel& camera, const Vec3& point_base) {
    Vec3 p = camera.pose.apply(point_base);
    if (!(p.z > 0.0)) return std::nullopt;
    return ProjectedPoint{camera.fx * p.x / p.z + camera.cx, camera.fy * p.y / p.z + camera.cy, p.z};
}

FramePose sample_camera_pose(std::uint64_t seed, double workspace_radius,
                             const CameraPoseParams& params) {
    if (!(workspace_radius > 0.0)) throw std::invalid_argument("workspace radius must be positive");
    Rng rng(mix_seed(seed, 0x63616d5fULL));

    double distance = rng.uniform(params.min_distance, params.max_distance);
    double azimuth = rng.uniform(0.0, 2.0 * 3.141592653589793);
    double elevation = rng.uniform(params.min_elevation, params.max_elevation);

    Vec3 center = params.look_at_center;
    Vec3 position = center + Vec3{distance * std::cos(elevation) * std::cos(azimuth),
                                  distance * std::cos(elevation) * std::sin(azimuth),
                                  distance * std::sin(elevation)};

    Vec3 target = center;
    if (params.look_at_jitter > 0.0) {
        for (;;) {
            Vec3 j{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
            if (j.dot(j) <= 1.0) {
                target = center + j * params.look_at_jitter;
                break;
            }
        }
    }

    Vec3 forward = (target - position).normalized();
    Vec3 up{0.0, 0.0, 1.0};
    if (std::abs(forward.dot(up)) > 0.999) up = {0.0, 1.0, 0.0};
    Vec3 right = forward.cross(up).normalized();
    Vec3 down = forward.cross(right); // y grows downward in the image

    // columns of base-from-camera rotation are the camera axes in base coords
    Mat3 base_from_cam;
    base_from_cam.m = {right.x, down.x, forward.x,
                       right.y, down.y, forward.y,
                       right.z, down.z, forward.z};

    FramePose cam_to_base{base_from_cam, position};
    return cam_to_base.inverse();
}

FramePose perturb_calibration(const FramePose& pose, double sigma_t, std::uint64_t seed,
                              const CalibrationNoise& noise) {
    if (sigma_t < 0.0) throw std::invalid_argument("sigma_t must be nonnegative");
    FramePose out = pose;
    Rng rng(mix_seed(seed, 0x63616c69ULL));

    if (sigma_t > 0.0) {
        Vec3 dt;
        for (;;) {
            dt = Vec3{rng.normal(), rng.normal(), rng.normal()} * sigma_t;
            if (dt.norm() <= noise.max_shift) break;
        }
        out.translation = out.translation + dt;

        double angle;
        for (;;) {
            angle = std::abs(rng.normal()) * noise.sigma_r;
            if (angle <= noise.max_angle) break;
        }
        Vec3 axis;
        for (;;) {
            axis = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
            double n2 = axis.dot(axis);
            if (n2 > 1e-6 && n2 <= 1.0) break;
        }
        out.rotation = Mat3::axis_angle(axis, angle) * out.rotation;
    }
    return out;
}

} // namespace rpnet
