#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rpnet/scene.hpp"

namespace rpnet {

struct ManifestEntry {
    std::string image_path; // relative to the dataset root
    std::string mask_path;
    RobotType robot_type = RobotType::UR5;
    Vec3 base_xyz;
    std::array<Vec3, kNumJoints> joints_xyz;
    CameraModel camera;
    JointConfig config;
    double fg_fraction = 0.0;
    int recording = -1;
};

struct DatasetManifest {
    std::string root_dir;
    std::vector<ManifestEntry> entries;
    std::array<std::int64_t, kNumRobotTypes> counts{};
    std::uint64_t seed = 0;
    int width = 0, height = 0;

    std::size_t size() const { return entries.size(); }
};

// Writes images/NNNNNN.png + masks/NNNNNN.png incrementally, then
// manifest.jsonl on finish().
class DatasetWriter {
public:
    DatasetWriter(std::string dir, int width, int height, std::uint64_t seed);

    void add(const Sample& sample, int recording = -1);
    DatasetManifest finish();

private:
    DatasetManifest manifest_;
    bool finished_ = false;
};

void save_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest load_manifest(const std::string& path, const std::string& root_dir);

// Reads dir/manifest.jsonl and checks that every referenced file exists.
DatasetManifest load_dataset(const std::string& dir);

Image load_entry_image(const DatasetManifest& manifest, std::size_t index);
Mask load_entry_mask(const DatasetManifest& manifest, std::size_t index);

// Seeded random partition; |train| = round(ratio * N). With stratify the
// ratio is applied per robot type instead of globally.
std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& manifest,
                                                          double ratio, std::uint64_t seed,
                                                          bool stratify = false);

Image resize_bilinear(const Image& image, int target_width, int target_height);
Mask resize_nearest(const Mask& mask, int target_width, int target_height);

// Image resized bilinearly and clamped to [0,1], mask by nearest neighbor;
// metric 3D labels are untouched, intrinsics are rescaled to stay consistent
// with the new pixel grid.
Sample normalize_and_resize(const Sample& sample, int target_width, int target_height);

} // namespace rpnet
