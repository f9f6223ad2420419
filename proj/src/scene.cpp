#include "rpnet/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rpnet/rng.hpp"

namespace rpnet {

namespace {

constexpr double kTmin = 1e-9;

struct Interval {
    double lo = 0.0;
    double hi = -1.0;
    bool empty() const { return lo > hi; }
};

// t-interval where the ray is inside the solid primitive
Interval inside_interval(const PosedPrimitive& prim, const Vec3& d) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    if (prim.is_sphere) {
        const Vec3& c = prim.a;
        double dd = d.dot(d);
        double dc = d.dot(c);
        double disc = dc * dc - dd * (c.dot(c) - prim.radius * prim.radius);
        if (disc < 0.0) return {};
        double s = std::sqrt(disc);
        return {(dc - s) / dd, (dc + s) / dd};
    }

    Vec3 axis = prim.b - prim.a;
    double len = axis.norm();
    if (len < 1e-12) return {}; // degenerate link, joints cover it
    Vec3 w = axis * (1.0 / len);
    Vec3 m = -prim.a; // ray origin is the camera center

    // axial slab 0 <= (m + t d) . w <= len
    double dw = d.dot(w);
    double mw = m.dot(w);
    Interval slab{-kInf, kInf};
    if (std::abs(dw) < 1e-15) {
        if (mw < 0.0 || mw > len) return {};
    } else {
        double t0 = (0.0 - mw) / dw;
        double t1 = (len - mw) / dw;
        slab = {std::min(t0, t1), std::max(t0, t1)};
    }

    // radial quadratic |m_perp + t d_perp|^2 <= r^2
    Vec3 dp = d - w * dw;
    Vec3 mp = m - w * mw;
    double a = dp.dot(dp);
    double b = mp.dot(dp);
    double c = mp.dot(mp) - prim.radius * prim.radius;
    Interval radial{-kInf, kInf};
    if (a < 1e-18) {
        if (c > 0.0) return {};
    } else {
        double disc = b * b - a * c;
        if (disc < 0.0) return {};
        double s = std::sqrt(disc);
        radial = {(-b - s) / a, (-b + s) / a};
    }

    return {std::max(slab.lo, radial.lo), std::min(slab.hi, radial.hi)};
}

struct Aabb {
    Vec3 lo, hi;
};

Aabb primitive_aabb(const PosedPrimitive& p) {
    Vec3 lo = p.a, hi = p.a;
    if (!p.is_sphere) {
        lo = {std::min(p.a.x, p.b.x), std::min(p.a.y, p.b.y), std::min(p.a.z, p.b.z)};
        hi = {std::max(p.a.x, p.b.x), std::max(p.a.y, p.b.y), std::max(p.a.z, p.b.z)};
    }
    Vec3 r{p.radius, p.radius, p.radius};
    return {lo - r, hi + r};
}

struct PixelBox {
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
    bool empty() const { return x0 > x1 || y0 > y1; }
};

// conservative screen bounds; primitives crossing the camera plane fall back
// to the full image
PixelBox screen_bounds(const CameraModel& cam, const PosedPrimitive& p) {
    Aabb box = primitive_aabb(p);
    if (box.hi.z <= kTmin) return {};
    if (box.lo.z <= 0.0) return {0, cam.width - 1, 0, cam.height - 1};

    double umin = std::numeric_limits<double>::infinity(), umax = -umin;
    double vmin = umin, vmax = -umin;
    for (int i = 0; i < 8; ++i) {
        Vec3 corner{(i & 1) ? box.hi.x : box.lo.x,
                    (i & 2) ? box.hi.y : box.lo.y,
                    (i & 4) ? box.hi.z : box.lo.z};
        double u = cam.fx * corner.x / corner.z + cam.cx;
        double v = cam.fy * corner.y / corner.z + cam.cy;
        umin = std::min(umin, u);
        umax = std::max(umax, u);
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
    }
    PixelBox out;
    out.x0 = std::max(0, static_cast<int>(std::floor(umin)) - 1);
    out.x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(umax)) + 1);
    out.y0 = std::max(0, static_cast<int>(std::floor(vmin)) - 1);
    out.y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(vmax)) + 1);
    return out;
}

inline Vec3 pixel_ray(const CameraModel& cam, int x, int y) {
    return {(static_cast<double>(x) - cam.cx) / cam.fx,
            (static_cast<double>(y) - cam.cy) / cam.fy, 1.0};
}

std::array<float, 3> base_color_for(RobotType t) {
    switch (t) {
        case RobotType::UR3: return {0.82f, 0.62f, 0.36f};
        case RobotType::UR5: return {0.42f, 0.58f, 0.80f};
        case RobotType::UR10: return {0.52f, 0.78f, 0.50f};
    }
    return {0.5f, 0.5f, 0.5f};
}

float smoothstep(float t) { return t * t * (3.0f - 2.0f * t); }

float cell_noise(std::int64_t gx, std::int64_t gy, std::uint64_t seed) {
    std::uint64_t h = mix_seed(seed, static_cast<std::uint64_t>(gx) * 0x9e3779b97f4a7c15ULL ^
                                         static_cast<std::uint64_t>(gy));
    return static_cast<float>(static_cast<double>(h >> 11) * 0x1.0p-53);
}

float value_noise(double x, double y, std::uint64_t seed) {
    double fx = std::floor(x), fy = std::floor(y);
    auto gx = static_cast<std::int64_t>(fx);
    auto gy = static_cast<std::int64_t>(fy);
    float tx = smoothstep(static_cast<float>(x - fx));
    float ty = smoothstep(static_cast<float>(y - fy));
    float v00 = cell_noise(gx, gy, seed), v10 = cell_noise(gx + 1, gy, seed);
    float v01 = cell_noise(gx, gy + 1, seed), v11 = cell_noise(gx + 1, gy + 1, seed);
    float a = v00 + (v10 - v00) * tx;
    float b = v01 + (v11 - v01) * tx;
    return a + (b - a) * ty;
}

std::array<float, 3> background_pixel(const BackgroundSpec& bg, int x, int y, int w, int h,
                                      std::uint64_t seed) {
    switch (bg.kind) {
        case BackgroundSpec::Kind::Flat:
            return bg.color_a;
        case BackgroundSpec::Kind::Gradient: {
            float t = bg.vertical ? static_cast<float>(y) / std::max(1, h - 1)
                                  : static_cast<float>(x) / std::max(1, w - 1);
            return {bg.color_a[0] + (bg.color_b[0] - bg.color_a[0]) * t,
                    bg.color_a[1] + (bg.color_b[1] - bg.color_a[1]) * t,
                    bg.color_a[2] + (bg.color_b[2] - bg.color_a[2]) * t};
        }
        case BackgroundSpec::Kind::Noise: {
            float t = value_noise(x / bg.noise_scale, y / bg.noise_scale, seed);
            return {bg.color_a[0] + (bg.color_b[0] - bg.color_a[0]) * t,
                    bg.color_a[1] + (bg.color_b[1] - bg.color_a[1]) * t,
                    bg.color_a[2] + (bg.color_b[2] - bg.color_a[2]) * t};
        }
    }
    return bg.color_a;
}

} // namespace

double Mask::foreground_fraction() const {
    if (data.empty()) return 0.0;
    std::size_t fg = 0;
    for (std::uint8_t v : data) fg += v;
    return static_cast<double>(fg) / static_cast<double>(data.size());
}

std::vector<PosedPrimitive> posed_primitives(const CameraModel& camera, const RobotModel& model,
                                             const JointConfig& config) {
    auto frames = forward_kinematics(model, config);
    std::array<Vec3, kNumJoints + 1> origins;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        origins[i] = camera.pose.apply(frames[i].translation);
    }

    std::vector<PosedPrimitive> out;
    out.reserve(model.geometry.size());
    for (const PrimitiveShape& s : model.geometry) {
        PosedPrimitive p;
        p.is_sphere = s.kind == PrimitiveShape::Kind::Sphere;
        p.a = origins[static_cast<std::size_t>(s.frame_a)];
        p.b = origins[static_cast<std::size_t>(s.frame_b)];
        p.radius = s.radius;
        out.push_back(p);
    }
    return out;
}

bool ray_hits(const PosedPrimitive& prim, const Vec3& dir) {
    Interval iv = inside_interval(prim, dir);
    return !iv.empty() && iv.hi > kTmin;
}

std::optional<RayHit> ray_entry(const PosedPrimitive& prim, const Vec3& dir) {
    Interval iv = inside_interval(prim, dir);
    if (iv.empty() || iv.hi <= kTmin) return std::nullopt;
    double t = iv.lo > kTmin ? iv.lo : iv.hi; // camera inside: shade the exit

    Vec3 q = dir * t;
    Vec3 n;
    if (prim.is_sphere) {
        n = (q - prim.a) * (1.0 / prim.radius);
    } else {
        Vec3 axis = prim.b - prim.a;
        double len = axis.norm();
        Vec3 w = axis * (1.0 / len);
        double s = (q - prim.a).dot(w);
        if (s < 1e-7 * len) {
            n = -w;
        } else if (s > len * (1.0 - 1e-7)) {
            n = w;
        } else {
            n = (q - prim.a - w * s) * (1.0 / prim.radius);
        }
    }
    return RayHit{t, n};
}

Mask render_mask(const CameraModel& camera, const RobotModel& model, const JointConfig& config) {
    camera.validate();
    auto prims = posed_primitives(camera, model, config);
    std::vector<PixelBox> boxes(prims.size());
    for (std::size_t i = 0; i < prims.size(); ++i) boxes[i] = screen_bounds(camera, prims[i]);

    Mask mask(camera.width, camera.height);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < camera.height; ++y) {
        std::uint8_t* row = mask.data.data() + static_cast<std::size_t>(y) * camera.width;
        for (std::size_t i = 0; i < prims.size(); ++i) {
            const PixelBox& box = boxes[i];
            if (box.empty() || y < box.y0 || y > box.y1) continue;
            for (int x = box.x0; x <= box.x1; ++x) {
                if (row[x]) continue;
                if (ray_hits(prims[i], pixel_ray(camera, x, y))) row[x] = 1;
            }
        }
    }
    return mask;
}

BackgroundSpec random_background(std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x62676b64ULL));
    BackgroundSpec bg;
    double pick = rng.uniform();
    bg.kind = pick < 0.34   ? BackgroundSpec::Kind::Flat
              : pick < 0.67 ? BackgroundSpec::Kind::Gradient
                            : BackgroundSpec::Kind::Noise;
    for (int c = 0; c < 3; ++c) bg.color_a[static_cast<std::size_t>(c)] = static_cast<float>(rng.uniform(0.05, 0.95));
    for (int c = 0; c < 3; ++c) bg.color_b[static_cast<std::size_t>(c)] = static_cast<float>(rng.uniform(0.05, 0.95));
    bg.noise_scale = rng.uniform(4.0, 16.0);
    bg.vertical = rng.uniform() < 0.5;
    return bg;
}

Image render_color(const CameraModel& camera, const RobotModel& model, const JointConfig& config,
                   const BackgroundSpec& background, std::uint64_t rng_seed) {
    camera.validate();
    auto prims = posed_primitives(camera, model, config);
    std::array<float, 3> base = base_color_for(model.type);

    // fixed directional light in the base frame, moved into the camera frame
    Vec3 light_base = Vec3{0.35, 0.25, 0.90}.normalized();
    Vec3 light = camera.pose.rotation * light_base;

    Image img(camera.width, camera.height, 3);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            Vec3 dir = pixel_ray(camera, x, y);
            double best_t = std::numeric_limits<double>::infinity();
            Vec3 best_n;
            for (const PosedPrimitive& p : prims) {
                auto hit = ray_entry(p, dir);
                if (hit && hit->t < best_t) {
                    best_t = hit->t;
                    best_n = hit->normal;
                }
            }

            std::array<float, 3> rgb;
            if (std::isfinite(best_t)) {
                double lambert = std::max(0.0, best_n.dot(light));
                double depth_cue = std::clamp(1.15 - 0.10 * best_t, 0.70, 1.0);
                double shade = (0.35 + 0.65 * lambert) * depth_cue;
                for (int c = 0; c < 3; ++c) {
                    rgb[static_cast<std::size_t>(c)] = static_cast<float>(base[static_cast<std::size_t>(c)] * shade);
                }
            } else {
                rgb = background_pixel(background, x, y, camera.width, camera.height, rng_seed);
            }
            for (int c = 0; c < 3; ++c) {
                img.at(y, x, c) = std::clamp(rgb[static_cast<std::size_t>(c)], 0.0f, 1.0f);
            }
        }
    }
    return img;
}

Sample make_sample(const RobotModel& model, const JointConfig& config, const CameraModel& camera,
                   const BackgroundSpec& background, std::uint64_t seed,
                   const MakeSampleOptions& options) {
    Sample s;
    s.robot_type = model.type;
    s.camera = camera;
    s.config = config;
    s.mask = render_mask(camera, model, config);
    s.image = render_color(camera, model, config, background, mix_seed(seed, 0x696d6721ULL));
    s.fg_fraction = s.mask.foreground_fraction();
    s.empty_mask = s.fg_fraction == 0.0;

    FramePose label_pose = camera.pose;
    if (options.calib_sigma_t > 0.0) {
        std::uint64_t calib_seed =
            options.calib_seed ? *options.calib_seed : mix_seed(seed, 0x68657965ULL);
        label_pose = perturb_calibration(camera.pose, options.calib_sigma_t, calib_seed,
                                         options.calib_noise);
    }
    s.base_xyz = label_pose.apply(Vec3{0.0, 0.0, 0.0});
    auto joints = joint_positions(model, config);
    for (int j = 0; j < kNumJoints; ++j) {
        s.joints_xyz[static_cast<std::size_t>(j)] = label_pose.apply(joints[static_cast<std::size_t>(j)]);
    }
    return s;
}

} // namespace rpnet
