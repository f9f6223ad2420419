#include "rpnet/kinematics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rpnet/errors.hpp"

namespace rpnet {

namespace {

constexpr double kPi = 3.141592653589793;
constexpr double kTwoPi = 2.0 * kPi;
constexpr double kHalfPi = 0.5 * kPi;

// Universal Robots published DH tables. Link lengths a are stored as
// magnitudes (the vendor table signs them negative; the mirrored chain has
// identical link geometry and reach).
constexpr std::array<DhRow, kNumJoints> kUr3Dh = {{
    {0.0, 0.1519, kHalfPi, 0.0},
    {0.24365, 0.0, 0.0, 0.0},
    {0.21325, 0.0, 0.0, 0.0},
    {0.0, 0.11235, kHalfPi, 0.0},
    {0.0, 0.08535, -kHalfPi, 0.0},
    {0.0, 0.0819, 0.0, 0.0},
}};

constexpr std::array<DhRow, kNumJoints> kUr5Dh = {{
    {0.0, 0.089159, kHalfPi, 0.0},
    {0.425, 0.0, 0.0, 0.0},
    {0.39225, 0.0, 0.0, 0.0},
    {0.0, 0.10915, kHalfPi, 0.0},
    {0.0, 0.09465, -kHalfPi, 0.0},
    {0.0, 0.0823, 0.0, 0.0},
}};

constexpr std::array<DhRow, kNumJoints> kUr10Dh = {{
    {0.0, 0.1273, kHalfPi, 0.0},
    {0.612, 0.0, 0.0, 0.0},
    {0.5723, 0.0, 0.0, 0.0},
    {0.0, 0.163941, kHalfPi, 0.0},
    {0.0, 0.1157, -kHalfPi, 0.0},
    {0.0, 0.0922, 0.0, 0.0},
}};

struct GeometryRadii {
    double joint;
    double link;
};

GeometryRadii radii_for(RobotType t) {
    switch (t) {
        case RobotType::UR3: return {0.045, 0.034};
        case RobotType::UR5: return {0.058, 0.044};
        case RobotType::UR10: return {0.074, 0.056};
    }
    return {0.058, 0.044};
}

std::vector<PrimitiveShape> make_geometry(RobotType t) {
    GeometryRadii r = radii_for(t);
    std::vector<PrimitiveShape> shapes;
    for (int link = 0; link < kNumJoints; ++link) {
        shapes.push_back({PrimitiveShape::Kind::Cylinder, link, link + 1, r.link});
    }
    for (int joint = 1; joint <= kNumJoints; ++joint) {
        shapes.push_back({PrimitiveShape::Kind::Sphere, joint, joint, r.joint});
    }
    return shapes;
}

RobotModel make_model(RobotType t, const std::array<DhRow, kNumJoints>& dh) {
    RobotModel m;
    m.type = t;
    m.dh = dh;
    m.geometry = make_geometry(t);
    m.validate();
    return m;
}

void check_angles(const JointConfig& config) {
    for (int j = 0; j < kNumJoints; ++j) {
        double q = config.angles[static_cast<std::size_t>(j)];
        if (!std::isfinite(q) || q < -kTwoPi || q > kTwoPi) {
            throw std::invalid_argument("joint angle " + std::to_string(j + 1) +
                                        " outside [-2pi, 2pi]: " + std::to_string(q));
        }
    }
}

} // namespace

const char* robot_type_name(RobotType t) {
    switch (t) {
        case RobotType::UR3: return "UR3";
        case RobotType::UR5: return "UR5";
        case RobotType::UR10: return "UR10";
    }
    return "UR5";
}

RobotType robot_type_from_name(const std::string& name) {
    std::string lower;
    for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "ur3") return RobotType::UR3;
    if (lower == "ur5") return RobotType::UR5;
    if (lower == "ur10") return RobotType::UR10;
    throw std::invalid_argument("unknown robot type: " + name);
}

void RobotModel::validate() const {
    for (int j = 0; j < kNumJoints; ++j) {
        const DhRow& row = dh[static_cast<std::size_t>(j)];
        if (!std::isfinite(row.a) || !std::isfinite(row.d) || !std::isfinite(row.alpha) ||
            !std::isfinite(row.theta0)) {
            throw std::invalid_argument("non-finite DH parameter in joint " + std::to_string(j + 1));
        }
        if (row.a < 0.0 || row.a > 2.0) {
            throw std::invalid_argument("link length a out of [0, 2] m in joint " +
                                        std::to_string(j + 1));
        }
        if (std::abs(row.d) > 2.0) {
            throw std::invalid_argument("link offset |d| above 2 m in joint " + std::to_string(j + 1));
        }
    }
    for (const PrimitiveShape& s : geometry) {
        if (s.radius <= 0.0) throw std::invalid_argument("primitive radius must be positive");
        if (s.kind == PrimitiveShape::Kind::Cylinder && s.frame_b != s.frame_a + 1) {
            throw std::invalid_argument("cylinder endpoints must be consecutive frames");
        }
        if (s.frame_a < 0 || s.frame_a > kNumJoints || s.frame_b < 0 || s.frame_b > kNumJoints) {
            throw std::invalid_argument("primitive frame index out of range");
        }
    }
}

FramePose dh_transform(const DhRow& row, double q) {
    double th = row.theta0 + q;
    FramePose t;
    t.rotation = Mat3::rot_z(th) * Mat3::rot_x(row.alpha);
    t.translation = {row.a * std::cos(th), row.a * std::sin(th), row.d};
    return t;
}

std::array<FramePose, kNumJoints + 1> forward_kinematics(const RobotModel& model,
                                                         const JointConfig& config) {
    check_angles(config);
    std::array<FramePose, kNumJoints + 1> poses;
    poses[0] = FramePose::identity();
    for (int j = 0; j < kNumJoints; ++j) {
        std::size_t i = static_cast<std::size_t>(j);
        poses[i + 1] = poses[i].compose(dh_transform(model.dh[i], config.angles[i]));
    }
    return poses;
}

std::array<Vec3, kNumJoints> joint_positions(const RobotModel& model, const JointConfig& config) {
    auto poses = forward_kinematics(model, config);
    std::array<Vec3, kNumJoints> points;
    for (int j = 0; j < kNumJoints; ++j) {
        points[static_cast<std::size_t>(j)] = poses[static_cast<std::size_t>(j) + 1].translation;
    }
    return points;
}

namespace {

std::vector<JointConfig> grid_sweep(const std::array<std::vector<double>, kNumJoints>& values,
                                    std::size_t max_count) {
    std::size_t product = 1;
    for (const auto& v : values) {
        if (v.empty()) return {};
        // saturate instead of overflowing on absurdly fine grids
        if (product > (std::size_t(1) << 62) / v.size()) {
            product = std::size_t(1) << 62;
        } else {
            product *= v.size();
        }
    }

    std::size_t count = std::min(product, max_count);
    std::vector<JointConfig> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        // evenly spaced indices keep coverage of the grid when capped
        std::size_t idx = (count == product || count <= 1)
                              ? i
                              : static_cast<std::size_t>(
                                    (static_cast<long double>(i) * (product - 1)) / (count - 1) + 0.5L);
        JointConfig c;
        for (int j = kNumJoints - 1; j >= 0; --j) {
            const auto& v = values[static_cast<std::size_t>(j)];
            c.angles[static_cast<std::size_t>(j)] = v[idx % v.size()];
            idx /= v.size();
        }
        out.push_back(c);
    }
    return out;
}

} // namespace

std::vector<JointConfig> sweep_trajectory(const RobotModel& model, double step,
                                          const SweepRanges& ranges, std::size_t max_count) {
    (void)model;
    if (!(step > 0.0)) throw std::invalid_argument("sweep step must be positive");
    std::array<std::vector<double>, kNumJoints> values;
    for (int j = 0; j < kNumJoints; ++j) {
        const JointRange& r = ranges[static_cast<std::size_t>(j)];
        if (r.lo < -kTwoPi || r.hi > kTwoPi) {
            throw std::invalid_argument("sweep range outside joint limits");
        }
        for (double v = r.lo; v <= r.hi + 1e-12; v += step) {
            values[static_cast<std::size_t>(j)].push_back(v);
        }
    }
    return grid_sweep(values, max_count);
}

std::vector<JointConfig> sweep_trajectory_exact(const RobotModel& model, const SweepRanges& ranges,
                                                std::size_t count) {
    (void)model;
    if (count == 0) return {};
    // grow per-joint position counts round-robin (wrist roll excluded: it
    // does not move any joint origin) until the grid is large enough
    std::array<std::size_t, kNumJoints> counts;
    counts.fill(1);
    auto product = [&]() {
        std::size_t p = 1;
        for (std::size_t c : counts) p *= c;
        return p;
    };
    int j = 0;
    while (product() < count) {
        counts[static_cast<std::size_t>(j)] += 1;
        j = (j + 1) % (kNumJoints - 1);
    }

    std::array<std::vector<double>, kNumJoints> values;
    for (int k = 0; k < kNumJoints; ++k) {
        const JointRange& r = ranges[static_cast<std::size_t>(k)];
        std::size_t n = counts[static_cast<std::size_t>(k)];
        if (r.lo > r.hi) return {};
        for (std::size_t i = 0; i < n; ++i) {
            double t = (n == 1) ? 0.5 : static_cast<double>(i) / static_cast<double>(n - 1);
            values[static_cast<std::size_t>(k)].push_back(r.lo + t * (r.hi - r.lo));
        }
    }
    return grid_sweep(values, count);
}

SweepRanges default_sweep_ranges() {
    return {{{-kPi, kPi},      // base yaw
             {0.35, 1.35},     // shoulder lift, keeps the arm above the table
             {-2.1, 2.1},      // elbow
             {-kPi, kPi},      // wrist 1
             {-1.5, 1.5},      // wrist 2
             {0.0, 0.0}}};     // wrist roll: does not move any joint origin
}

const std::array<RobotModel, kNumRobotTypes>& builtin_robot_models() {
    static const std::array<RobotModel, kNumRobotTypes> models = {
        make_model(RobotType::UR3, kUr3Dh),
        make_model(RobotType::UR5, kUr5Dh),
        make_model(RobotType::UR10, kUr10Dh),
    };
    return models;
}

const RobotModel& robot_model_for(RobotType type) {
    return builtin_robot_models()[static_cast<std::size_t>(type)];
}

std::array<RobotModel, kNumRobotTypes> load_robot_models(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open kinematic parameter table: " + path);

    std::array<RobotModel, kNumRobotTypes> models = builtin_robot_models();
    std::array<std::array<bool, kNumJoints>, kNumRobotTypes> seen{};

    int section = -1;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        std::string head;
        if (!(ss >> head)) continue;

        if (head.front() == '[') {
            std::string name = head.substr(1, head.find(']') - 1);
            section = static_cast<int>(robot_type_from_name(name));
            continue;
        }
        if (section < 0) throw DataError(path + ":" + std::to_string(lineno) + ": joint before section");
        if (head.rfind("joint", 0) != 0) {
            throw DataError(path + ":" + std::to_string(lineno) + ": expected jointN key");
        }
        int joint = std::stoi(head.substr(5));
        if (joint < 1 || joint > kNumJoints) {
            throw DataError(path + ":" + std::to_string(lineno) + ": joint index out of range");
        }
        std::string eq;
        DhRow row;
        if (!(ss >> eq >> row.a >> row.d >> row.alpha >> row.theta0) || eq != "=") {
            throw DataError(path + ":" + std::to_string(lineno) + ": expected 'jointN = a d alpha theta0'");
        }
        models[static_cast<std::size_t>(section)].dh[static_cast<std::size_t>(joint - 1)] = row;
        seen[static_cast<std::size_t>(section)][static_cast<std::size_t>(joint - 1)] = true;
    }

    for (int t = 0; t < kNumRobotTypes; ++t) {
        for (int j = 0; j < kNumJoints; ++j) {
            if (!seen[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)]) {
                throw DataError(path + ": missing joint" + std::to_string(j + 1) + " for " +
                                robot_type_name(static_cast<RobotType>(t)));
            }
        }
        models[static_cast<std::size_t>(t)].validate();
    }
    return models;
}

} // namespace rpnet
