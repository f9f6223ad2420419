#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rpnet/errors.hpp"
#include "rpnet/kinematics.hpp"
#include "rpnet/rng.hpp"

using namespace rpnet;

namespace {

// Independent oracle: plain 4x4 homogeneous matrices, standard DH entries
// written out longhand. Shares no code with FramePose.
struct Mat4 {
    double m[16];
};

Mat4 mat4_identity() {
    Mat4 r{};
    r.m[0] = r.m[5] = r.m[10] = r.m[15] = 1.0;
    return r;
}

Mat4 mat4_mul(const Mat4& a, const Mat4& b) {
    Mat4 r{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) acc += a.m[i * 4 + k] * b.m[k * 4 + j];
            r.m[i * 4 + j] = acc;
        }
    return r;
}

Mat4 dh_mat(const DhRow& row, double q) {
    double ct = std::cos(row.theta0 + q), st = std::sin(row.theta0 + q);
    double ca = std::cos(row.alpha), sa = std::sin(row.alpha);
    Mat4 r{};
    r.m[0] = ct;  r.m[1] = -st * ca; r.m[2] = st * sa;   r.m[3] = row.a * ct;
    r.m[4] = st;  r.m[5] = ct * ca;  r.m[6] = -ct * sa;  r.m[7] = row.a * st;
    r.m[8] = 0;   r.m[9] = sa;       r.m[10] = ca;       r.m[11] = row.d;
    r.m[15] = 1.0;
    return r;
}

double frame_vs_mat4(const FramePose& f, const Mat4& t) {
    double err = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            err = std::max(err, std::abs(f.rotation(i, j) - t.m[i * 4 + j]));
        }
    err = std::max(err, std::abs(f.translation.x - t.m[3]));
    err = std::max(err, std::abs(f.translation.y - t.m[7]));
    err = std::max(err, std::abs(f.translation.z - t.m[11]));
    return err;
}

JointConfig random_config(Rng& rng) {
    JointConfig q;
    for (double& a : q.angles) a = rng.uniform(-3.14, 3.14);
    return q;
}

} // namespace

TEST_CASE("forward kinematics matches an independent homogeneous-matrix composition") {
    for (const RobotModel& model : builtin_robot_models()) {
        Rng rng(mix_seed(17, static_cast<std::uint64_t>(model.type)));
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            JointConfig q = random_config(rng);
            auto frames = forward_kinematics(model, q);
            Mat4 t = mat4_identity();
            CHECK(frame_vs_mat4(frames[0], t) == 0.0);
            for (int j = 0; j < kNumJoints; ++j) {
                t = mat4_mul(t, dh_mat(model.dh[static_cast<std::size_t>(j)], q.angles[static_cast<std::size_t>(j)]));
                worst = std::max(worst, frame_vs_mat4(frames[static_cast<std::size_t>(j) + 1], t));
            }
        }
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("rotations stay orthonormal over a thousand random configurations") {
    Rng rng(99);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const RobotModel& model = robot_model_for(static_cast<RobotType>(trial % 3));
        auto frames = forward_kinematics(model, random_config(rng));
        for (const FramePose& f : frames) worst = std::max(worst, f.orthonormality_error());
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("ur5 joint positions at the zero configuration match hand-derived values") {
    // frozen from an independent DH composition of the pinned ur5 table
    const double expected[6][3] = {
        {0.0, 0.0, 0.089159},
        {0.425, 0.0, 0.089159},
        {0.81725, 0.0, 0.089159},
        {0.81725, -0.10915, 0.089159},
        {0.81725, -0.10915, -0.005491},
        {0.81725, -0.19145, -0.005491},
    };
    auto pos = joint_positions(robot_model_for(RobotType::UR5), JointConfig{});
    for (int j = 0; j < kNumJoints; ++j) {
        CHECK(pos[static_cast<std::size_t>(j)].x == doctest::Approx(expected[j][0]).epsilon(1e-12));
        CHECK(pos[static_cast<std::size_t>(j)].y == doctest::Approx(expected[j][1]).epsilon(1e-12));
        CHECK(pos[static_cast<std::size_t>(j)].z == doctest::Approx(expected[j][2]).epsilon(1e-12));
    }
}

TEST_CASE("ur5 end effector at a mixed configuration matches a frozen oracle value") {
    const double pi = 3.14159265358979323846;
    JointConfig q{{pi / 2, -pi / 4, pi / 3, -pi / 6, pi / 5, pi / 7}};
    auto frames = forward_kinematics(robot_model_for(RobotType::UR5), q);
    const FramePose& ee = frames[6];
    CHECK(ee.translation.x == doctest::Approx(0.17573209863705824).epsilon(1e-12));
    CHECK(ee.translation.y == doctest::Approx(0.60818116730947269).epsilon(1e-12));
    CHECK(ee.translation.z == doctest::Approx(-0.1887441905624202).epsilon(1e-12));
    CHECK(ee.rotation(0, 0) == doctest::Approx(0.52957621332768745).epsilon(1e-12));
    CHECK(ee.rotation(0, 1) == doctest::Approx(-0.25503046306281563).epsilon(1e-12));
    CHECK(ee.rotation(0, 2) == doctest::Approx(0.80901699437494745).epsilon(1e-12));
}

TEST_CASE("joint_positions equals the frame translations") {
    Rng rng(5);
    JointConfig q = random_config(rng);
    const RobotModel& model = robot_model_for(RobotType::UR10);
    auto frames = forward_kinematics(model, q);
    auto pos = joint_positions(model, q);
    for (int j = 0; j < kNumJoints; ++j) {
        CHECK(pos[static_cast<std::size_t>(j)].x == frames[static_cast<std::size_t>(j) + 1].translation.x);
        CHECK(pos[static_cast<std::size_t>(j)].y == frames[static_cast<std::size_t>(j) + 1].translation.y);
        CHECK(pos[static_cast<std::size_t>(j)].z == frames[static_cast<std::size_t>(j) + 1].translation.z);
    }
}

TEST_CASE("angles outside two full turns are rejected") {
    JointConfig q{};
    q.angles[2] = 6.5;
    CHECK_THROWS_AS(forward_kinematics(robot_model_for(RobotType::UR3), q), std::invalid_argument);
    q.angles[2] = -6.5;
    CHECK_THROWS_AS(forward_kinematics(robot_model_for(RobotType::UR3), q), std::invalid_argument);
}

TEST_CASE("exact sweeps return the requested number of configurations") {
    const RobotModel& model = robot_model_for(RobotType::UR5);
    SweepRanges ranges = default_sweep_ranges();
    for (std::size_t count : {std::size_t(1), std::size_t(2), std::size_t(7), std::size_t(211),
                              std::size_t(252), std::size_t(463), std::size_t(756),
                              std::size_t(1512), std::size_t(112), std::size_t(278),
                              std::size_t(514), std::size_t(1000)}) {
        auto sweep = sweep_trajectory_exact(model, ranges, count);
        CHECK(sweep.size() == count);
    }
    Rng rng(31);
    for (int i = 0; i < 20; ++i) {
        std::size_t count = 1 + rng.below(2000);
        CHECK(sweep_trajectory_exact(model, ranges, count).size() == count);
    }
}

TEST_CASE("exact sweeps are deterministic and stay inside the ranges") {
    const RobotModel& model = robot_model_for(RobotType::UR3);
    SweepRanges ranges = default_sweep_ranges();
    auto a = sweep_trajectory_exact(model, ranges, 463);
    auto b = sweep_trajectory_exact(model, ranges, 463);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (int j = 0; j < kNumJoints; ++j) {
            CHECK(a[i].angles[static_cast<std::size_t>(j)] == b[i].angles[static_cast<std::size_t>(j)]);
            CHECK(a[i].angles[static_cast<std::size_t>(j)] >= ranges[static_cast<std::size_t>(j)].lo - 1e-12);
            CHECK(a[i].angles[static_cast<std::size_t>(j)] <= ranges[static_cast<std::size_t>(j)].hi + 1e-12);
        }
    }
}

TEST_CASE("sweep_trajectory covers a grid and honors max_count") {
    const RobotModel& model = robot_model_for(RobotType::UR5);
    SweepRanges ranges{};
    ranges[0] = {-1.0, 1.0};
    ranges[1] = {0.5, 1.0};
    auto sweep = sweep_trajectory(model, 0.5, ranges);
    CHECK(sweep.size() == 10); // 5 steps x 2 steps, single configs for held joints
    auto capped = sweep_trajectory(model, 0.5, ranges, 4);
    CHECK(capped.size() == 4);
}

TEST_CASE("parameter table file round trips against the builtin models") {
    auto loaded = load_robot_models(std::string(RPNET_DATA_DIR) + "/ur_dh.txt");
    const auto& builtin = builtin_robot_models();
    for (int t = 0; t < kNumRobotTypes; ++t) {
        for (int j = 0; j < kNumJoints; ++j) {
            const DhRow& lhs = loaded[static_cast<std::size_t>(t)].dh[static_cast<std::size_t>(j)];
            const DhRow& rhs = builtin[static_cast<std::size_t>(t)].dh[static_cast<std::size_t>(j)];
            CHECK(lhs.a == rhs.a);
            CHECK(lhs.d == rhs.d);
            CHECK(lhs.alpha == rhs.alpha);
            CHECK(lhs.theta0 == rhs.theta0);
        }
    }
}

TEST_CASE("parameter table loader rejects malformed and incomplete files") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "rpnet_dh_test";
    fs::create_directories(dir);

    {
        std::ofstream out(dir / "missing.txt");
        out << "[ur3]\n";
        for (int j = 1; j <= 6; ++j) out << "joint" << j << " = 0 0.1 0 0\n";
    }
    CHECK_THROWS_AS(load_robot_models((dir / "missing.txt").string()), DataError);

    {
        std::ofstream out(dir / "short.txt");
        out << "[ur3]\njoint1 = 0 0.1 0\n";
    }
    CHECK_THROWS_AS(load_robot_models((dir / "short.txt").string()), DataError);

    CHECK_THROWS_AS(load_robot_models((dir / "does_not_exist.txt").string()), DataError);
    fs::remove_all(dir);
}

TEST_CASE("dh_transform of the zero row is the identity") {
    FramePose t = dh_transform(DhRow{}, 0.0);
    CHECK(t.orthonormality_error() < 1e-15);
    CHECK(t.translation.norm() == 0.0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(t.rotation(i, j) == (i == j ? 1.0 : 0.0));
}
