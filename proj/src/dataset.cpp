#include "rpnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "rpnet/errors.hpp"
#include "rpnet/png_io.hpp"
#include "rpnet/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace rpnet {

namespace {

json vec3_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec3_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw DataError("expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json entry_to_json(const ManifestEntry& e) {
    json joints = json::array();
    for (const Vec3& j : e.joints_xyz) joints.push_back(vec3_to_json(j));
    json angles = json::array();
    for (double a : e.config.angles) angles.push_back(a);
    json rotation = json::array();
    for (double r : e.camera.pose.rotation.m) rotation.push_back(r);

    return json{{"image", e.image_path},
                {"mask", e.mask_path},
                {"type", robot_type_name(e.robot_type)},
                {"base_xyz", vec3_to_json(e.base_xyz)},
                {"joints_xyz", joints},
                {"joint_angles", angles},
                {"fg_fraction", e.fg_fraction},
                {"recording", e.recording},
                {"camera",
                 {{"fx", e.camera.fx},
                  {"fy", e.camera.fy},
                  {"cx", e.camera.cx},
                  {"cy", e.camera.cy},
                  {"width", e.camera.width},
                  {"height", e.camera.height},
                  {"rotation", rotation},
                  {"translation", vec3_to_json(e.camera.pose.translation)}}}};
}

ManifestEntry entry_from_json(const json& j) {
    ManifestEntry e;
    e.image_path = j.at("image").get<std::string>();
    e.mask_path = j.at("mask").get<std::string>();
    e.robot_type = robot_type_from_name(j.at("type").get<std::string>());
    e.base_xyz = vec3_from_json(j.at("base_xyz"));
    const json& joints = j.at("joints_xyz");
    if (joints.size() != kNumJoints) throw DataError("joints_xyz must have 6 entries");
    for (int i = 0; i < kNumJoints; ++i) e.joints_xyz[static_cast<std::size_t>(i)] = vec3_from_json(joints[static_cast<std::size_t>(i)]);
    const json& angles = j.at("joint_angles");
    for (int i = 0; i < kNumJoints; ++i) e.config.angles[static_cast<std::size_t>(i)] = angles.at(static_cast<std::size_t>(i)).get<double>();
    e.fg_fraction = j.value("fg_fraction", 0.0);
    e.recording = j.value("recording", -1);

    const json& cam = j.at("camera");
    e.camera.fx = cam.at("fx").get<double>();
    e.camera.fy = cam.at("fy").get<double>();
    e.camera.cx = cam.at("cx").get<double>();
    e.camera.cy = cam.at("cy").get<double>();
    e.camera.width = cam.at("width").get<int>();
    e.camera.height = cam.at("height").get<int>();
    const json& rot = cam.at("rotation");
    for (int i = 0; i < 9; ++i) e.camera.pose.rotation.m[static_cast<std::size_t>(i)] = rot.at(static_cast<std::size_t>(i)).get<double>();
    e.camera.pose.translation = vec3_from_json(cam.at("translation"));
    return e;
}

void recompute_counts(DatasetManifest& m) {
    m.counts = {0, 0, 0};
    for (const ManifestEntry& e : m.entries) m.counts[static_cast<std::size_t>(e.robot_type)] += 1;
}

} // namespace

DatasetWriter::DatasetWriter(std::string dir, int width, int height, std::uint64_t seed) {
    manifest_.root_dir = std::move(dir);
    manifest_.width = width;
    manifest_.height = height;
    manifest_.seed = seed;
    fs::create_directories(fs::path(manifest_.root_dir) / "images");
    fs::create_directories(fs::path(manifest_.root_dir) / "masks");
}

void DatasetWriter::add(const Sample& sample, int recording) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.png", manifest_.entries.size());

    ManifestEntry e;
    e.image_path = std::string("images/") + name;
    e.mask_path = std::string("masks/") + name;
    e.robot_type = sample.robot_type;
    e.base_xyz = sample.base_xyz;
    e.joints_xyz = sample.joints_xyz;
    e.camera = sample.camera;
    e.config = sample.config;
    e.fg_fraction = sample.fg_fraction;
    e.recording = recording;

    write_png_rgb8((fs::path(manifest_.root_dir) / e.image_path).string(), sample.image);
    write_png_gray8((fs::path(manifest_.root_dir) / e.mask_path).string(), sample.mask);
    manifest_.entries.push_back(std::move(e));
}

DatasetManifest DatasetWriter::finish() {
    finished_ = true;
    recompute_counts(manifest_);
    save_manifest(manifest_, (fs::path(manifest_.root_dir) / "manifest.jsonl").string());
    return manifest_;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest: " + path);

    json header{{"format", "rpnet-dataset"},
                {"version", 1},
                {"seed", manifest.seed},
                {"width", manifest.width},
                {"height", manifest.height},
                {"counts",
                 {{"UR3", manifest.counts[0]}, {"UR5", manifest.counts[1]}, {"UR10", manifest.counts[2]}}}};
    out << header.dump() << "\n";
    for (const ManifestEntry& e : manifest.entries) {
        out << entry_to_json(e).dump() << "\n";
    }
    if (!out) throw DataError("failed writing manifest: " + path);
}

DatasetManifest load_manifest(const std::string& path, const std::string& root_dir) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path);

    DatasetManifest m;
    m.root_dir = root_dir;

    std::string line;
    if (!std::getline(in, line)) throw DataError("empty manifest: " + path);
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& ex) {
        throw DataError("malformed manifest header in " + path + ": " + ex.what());
    }
    if (header.value("format", "") != "rpnet-dataset") {
        throw DataError("not a dataset manifest: " + path);
    }
    m.seed = header.value("seed", std::uint64_t{0});
    m.width = header.value("width", 0);
    m.height = header.value("height", 0);

    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            m.entries.push_back(entry_from_json(json::parse(line)));
        } catch (const json::exception& ex) {
            throw DataError(path + ":" + std::to_string(lineno) + ": malformed entry: " + ex.what());
        }
    }
    recompute_counts(m);

    if (header.contains("counts")) {
        const json& c = header["counts"];
        std::array<std::int64_t, 3> declared{c.value("UR3", std::int64_t{0}), c.value("UR5", std::int64_t{0}),
                                             c.value("UR10", std::int64_t{0})};
        if (declared != m.counts) {
            throw DataError("manifest header counts disagree with entries in " + path);
        }
    }

    for (const ManifestEntry& e : m.entries) {
        for (const std::string& rel : {e.image_path, e.mask_path}) {
            fs::path p = fs::path(root_dir) / rel;
            if (!fs::exists(p)) throw DataError("missing dataset file: " + p.string());
        }
    }
    return m;
}

DatasetManifest load_dataset(const std::string& dir) {
    return load_manifest((fs::path(dir) / "manifest.jsonl").string(), dir);
}

Image load_entry_image(const DatasetManifest& manifest, std::size_t index) {
    return read_png_rgb((fs::path(manifest.root_dir) / manifest.entries[index].image_path).string());
}

Mask load_entry_mask(const DatasetManifest& manifest, std::size_t index) {
    return read_png_gray((fs::path(manifest.root_dir) / manifest.entries[index].mask_path).string());
}

std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& manifest,
                                                          double ratio, std::uint64_t seed,
                                                          bool stratify) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("split ratio must be in (0, 1)");
    std::size_t n = manifest.entries.size();
    if (n < 2) throw DataError("dataset too small to split (need at least 2 samples)");

    DatasetManifest train, test;
    for (DatasetManifest* m : {&train, &test}) {
        m->root_dir = manifest.root_dir;
        m->width = manifest.width;
        m->height = manifest.height;
        m->seed = mix_seed(seed, 0x73706c69ULL);
    }

    auto take = [&](const std::vector<std::size_t>& pool, std::uint64_t stream) {
        std::vector<std::size_t> order = pool;
        Rng rng(mix_seed(seed, 0x73706c69ULL, stream));
        rng.shuffle(order);
        std::size_t n_train = static_cast<std::size_t>(
            std::lround(ratio * static_cast<double>(order.size())));
        n_train = std::min(n_train, order.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            (i < n_train ? train : test).entries.push_back(manifest.entries[order[i]]);
        }
    };

    if (stratify) {
        for (int t = 0; t < kNumRobotTypes; ++t) {
            std::vector<std::size_t> pool;
            for (std::size_t i = 0; i < n; ++i) {
                if (static_cast<int>(manifest.entries[i].robot_type) == t) pool.push_back(i);
            }
            if (!pool.empty()) take(pool, static_cast<std::uint64_t>(t) + 1);
        }
    } else {
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
        take(pool, 0);
    }

    recompute_counts(train);
    recompute_counts(test);
    return {std::move(train), std::move(test)};
}

Image resize_bilinear(const Image& image, int target_width, int target_height) {
    if (target_width < 8 || target_height < 8) {
        throw std::invalid_argument("target resolution must be at least 8x8");
    }
    Image out(target_width, target_height, image.channels);
    double sx = static_cast<double>(image.width) / target_width;
    double sy = static_cast<double>(image.height) / target_height;
    for (int y = 0; y < target_height; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int y0c = std::clamp(y0, 0, image.height - 1);
        int y1c = std::clamp(y0 + 1, 0, image.height - 1);
        for (int x = 0; x < target_width; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double wx = fx - x0;
            int x0c = std::clamp(x0, 0, image.width - 1);
            int x1c = std::clamp(x0 + 1, 0, image.width - 1);
            for (int c = 0; c < image.channels; ++c) {
                double v00 = image.at(y0c, x0c, c), v01 = image.at(y0c, x1c, c);
                double v10 = image.at(y1c, x0c, c), v11 = image.at(y1c, x1c, c);
                double top = v00 + (v01 - v00) * wx;
                double bot = v10 + (v11 - v10) * wx;
                double v = top + (bot - top) * wy;
                out.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }
    return out;
}

Mask resize_nearest(const Mask& mask, int target_width, int target_height) {
    if (target_width < 8 || target_height < 8) {
        throw std::invalid_argument("target resolution must be at least 8x8");
    }
    Mask out(target_width, target_height);
    double sx = static_cast<double>(mask.width) / target_width;
    double sy = static_cast<double>(mask.height) / target_height;
    for (int y = 0; y < target_height; ++y) {
        int sy0 = std::clamp(static_cast<int>(std::floor((y + 0.5) * sy)), 0, mask.height - 1);
        for (int x = 0; x < target_width; ++x) {
            int sx0 = std::clamp(static_cast<int>(std::floor((x + 0.5) * sx)), 0, mask.width - 1);
            out.at(y, x) = mask.at(sy0, sx0);
        }
    }
    return out;
}

Sample normalize_and_resize(const Sample& sample, int target_width, int target_height) {
    Sample out = sample;
    if (sample.image.width == target_width && sample.image.height == target_height) {
        for (float& v : out.image.data) v = std::clamp(v, 0.0f, 1.0f);
        return out;
    }
    out.image = resize_bilinear(sample.image, target_width, target_height);
    out.mask = resize_nearest(sample.mask, target_width, target_height);
    out.camera.fx *= static_cast<double>(target_width) / sample.image.width;
    out.camera.cx *= static_cast<double>(target_width) / sample.image.width;
    out.camera.fy *= static_cast<double>(target_height) / sample.image.height;
    out.camera.cy *= static_cast<double>(target_height) / sample.image.height;
    out.camera.width = target_width;
    out.camera.height = target_height;
    out.fg_fraction = out.mask.foreground_fraction();
    return out;
}

} // namespace rpnet
