#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rpnet/dataset.hpp"
#include "rpnet/scene.hpp"

namespace rpnet {

struct GenOptions {
    int width = 64;
    int height = 53;
    double fg_min = 0.04; // accepted foreground-fraction band
    double fg_max = 0.20;
    MakeSampleOptions sample; // calibration-noise settings
    int max_attempts = 64;    // rejection budget per random sample
};

// Camera distance band for one robot type, in multiples of its reach.
struct CameraBand {
    double near_factor = 1.0;
    double far_factor = 1.6;
};

double robot_reach(const RobotModel& model);
CameraBand camera_band_for(RobotType type);
CameraPoseParams camera_params_for(const RobotModel& model);

// One accepted sample: rejection-samples camera pose, joint config and
// background until the mask is nonempty and fg lands inside the band.
Sample generate_sample(const RobotModel& model, std::uint64_t master_seed, std::uint64_t index,
                       const GenOptions& options = {});

// counts[t] samples of each type, written to dir (images/, masks/,
// manifest.jsonl). Deterministic in (seed, counts, options).
DatasetManifest generate_random_dataset(const std::string& dir,
                                        const std::array<std::int64_t, kNumRobotTypes>& counts,
                                        std::uint64_t seed, const GenOptions& options = {});

// Recording preset: 9 recordings, 3 per robot type, with the pinned sample
// counts. Each recording has one fixed camera pose and one shared
// calibration perturbation (a recording is calibrated once).
struct RecordingInfo {
    int recording = 0; // 1-based
    RobotType type = RobotType::UR3;
    std::size_t count = 0;
    FramePose true_pose;
    FramePose calibrated_pose;
    double mean_fg = 0.0;
    double calib_shift_m = 0.0; // |t_calibrated - t_true|
};

struct PaperAnalogResult {
    DatasetManifest manifest;
    std::array<RecordingInfo, 9> recordings;
};

extern const std::array<std::size_t, 9> kRecordingCounts;
extern const std::array<RobotType, 9> kRecordingTypes;

// Also writes dir/recordings.json describing the per-recording calibration.
PaperAnalogResult generate_paper_analog(const std::string& dir, std::uint64_t seed,
                                        const GenOptions& options = {});

} // namespace rpnet
