#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rpnet/geometry.hpp"
#include "rpnet/primitives.hpp"

namespace rpnet {

enum class RobotType { UR3 = 0, UR5 = 1, UR10 = 2 };

constexpr int kNumRobotTypes = 3;
constexpr int kNumJoints = 6;

const char* robot_type_name(RobotType t);
RobotType robot_type_from_name(const std::string& name);

// Standard DH row: Rz(theta0 + q) * Tz(d) * Tx(a) * Rx(alpha).
struct DhRow {
    double a = 0.0;      // link length, meters, >= 0
    double d = 0.0;      // link offset, meters, |d| <= 2
    double alpha = 0.0;  // twist, radians
    double theta0 = 0.0; // fixed angle offset, radians
};

struct RobotModel {
    RobotType type = RobotType::UR5;
    std::array<DhRow, kNumJoints> dh{};
    std::vector<PrimitiveShape> geometry;

    void validate() const; // throws std::invalid_argument on bad parameters
};

struct JointConfig {
    std::array<double, kNumJoints> angles{};
};

// per-joint closed angle interval for sweeps; lo > hi means empty
struct JointRange {
    double lo = 0.0;
    double hi = 0.0;
};
using SweepRanges = std::array<JointRange, kNumJoints>;

FramePose dh_transform(const DhRow& row, double q);

// Base frame (identity) followed by the 6 joint frames, all in the robot
// base frame. Throws std::invalid_argument if any angle leaves [-2pi, 2pi].
std::array<FramePose, kNumJoints + 1> forward_kinematics(const RobotModel& model,
                                                         const JointConfig& config);

// Translations of frames 1..6.
std::array<Vec3, kNumJoints> joint_positions(const RobotModel& model, const JointConfig& config);

// Deterministic lexicographic grid over the given ranges with the given step
// per joint (last joint varies fastest). If the full grid exceeds max_count,
// evenly spaced grid indices are kept so the sweep still covers the ranges.
std::vector<JointConfig> sweep_trajectory(const RobotModel& model, double step,
                                          const SweepRanges& ranges,
                                          std::size_t max_count = 1u << 20);

// Grid sweep sized to produce exactly `count` configurations (used for the
// recording presets where the sample count is prescribed).
std::vector<JointConfig> sweep_trajectory_exact(const RobotModel& model, const SweepRanges& ranges,
                                                std::size_t count);

SweepRanges default_sweep_ranges();

// Pinned parameter tables (same values as data/ur_dh.txt).
const std::array<RobotModel, kNumRobotTypes>& builtin_robot_models();
const RobotModel& robot_model_for(RobotType type);

// Parses a key-value table file ([ur3]/[ur5]/[ur10] sections, one line per
// joint: "jointN = a d alpha theta0"). All three robots must be present.
std::array<RobotModel, kNumRobotTypes> load_robot_models(const std::string& path);

} // namespace rpnet
