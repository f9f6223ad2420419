#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "rpnet/batches.hpp"
#include "rpnet/dataset.hpp"
#include "rpnet/errors.hpp"
#include "rpnet/generate.hpp"
#include "rpnet/rng.hpp"

using namespace rpnet;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("rpnet_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// in-memory manifest with distinct paths and cycling robot types
DatasetManifest synthetic_manifest(std::size_t n) {
    DatasetManifest m;
    m.root_dir = "/nowhere";
    m.width = 64;
    m.height = 53;
    for (std::size_t i = 0; i < n; ++i) {
        ManifestEntry e;
        e.image_path = "images/" + std::to_string(i) + ".png";
        e.mask_path = "masks/" + std::to_string(i) + ".png";
        e.robot_type = static_cast<RobotType>(i % 3);
        e.base_xyz = {0.1 * static_cast<double>(i), -0.4, 1.3};
        m.entries.push_back(e);
        ++m.counts[i % 3];
    }
    return m;
}

std::set<std::string> paths_of(const DatasetManifest& m) {
    std::set<std::string> s;
    for (const auto& e : m.entries) s.insert(e.image_path);
    return s;
}

} // namespace

TEST_CASE("an 80/20 split of ten samples yields exactly eight and two") {
    DatasetManifest m = synthetic_manifest(10);
    auto [train, test] = split_dataset(m, 0.8, 42);
    CHECK(train.size() == 8);
    CHECK(test.size() == 2);

    auto tr = paths_of(train), te = paths_of(test);
    CHECK(tr.size() == 8);
    CHECK(te.size() == 2);
    std::set<std::string> all = tr;
    all.insert(te.begin(), te.end());
    CHECK(all == paths_of(m));
}

TEST_CASE("an 80/20 split of 4350 samples yields exactly 3480 and 870") {
    DatasetManifest m = synthetic_manifest(4350);
    auto [train, test] = split_dataset(m, 0.8, 7);
    CHECK(train.size() == 3480);
    CHECK(test.size() == 870);
}

TEST_CASE("a stratified split applies the ratio per robot type") {
    DatasetManifest m = synthetic_manifest(30); // 10 per type
    auto [train, test] = split_dataset(m, 0.8, 9, true);
    std::array<int, 3> tr{}, te{};
    for (const auto& e : train.entries) ++tr[static_cast<std::size_t>(e.robot_type)];
    for (const auto& e : test.entries) ++te[static_cast<std::size_t>(e.robot_type)];
    for (int t = 0; t < 3; ++t) {
        CHECK(tr[static_cast<std::size_t>(t)] == 8);
        CHECK(te[static_cast<std::size_t>(t)] == 2);
    }
    CHECK(train.counts[0] == 8);
    CHECK(test.counts[2] == 2);
}

TEST_CASE("splitting is deterministic in the seed and rejects bad input") {
    DatasetManifest m = synthetic_manifest(50);
    auto [a_train, a_test] = split_dataset(m, 0.8, 5);
    auto [b_train, b_test] = split_dataset(m, 0.8, 5);
    REQUIRE(a_train.size() == b_train.size());
    for (std::size_t i = 0; i < a_train.size(); ++i) {
        CHECK(a_train.entries[i].image_path == b_train.entries[i].image_path);
    }
    auto [c_train, c_test] = split_dataset(m, 0.8, 6);
    bool same_order = true;
    for (std::size_t i = 0; i < a_train.size(); ++i) {
        if (a_train.entries[i].image_path != c_train.entries[i].image_path) same_order = false;
    }
    CHECK(!same_order);

    CHECK_THROWS_AS(split_dataset(m, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(split_dataset(m, 1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(split_dataset(m, -0.3, 1), std::invalid_argument);
    CHECK_THROWS_AS(split_dataset(synthetic_manifest(1), 0.8, 1), DataError);
}

TEST_CASE("resizing to the same resolution is the identity") {
    Rng rng(3);
    Image img(17, 11, 3);
    for (float& v : img.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
    Image same = resize_bilinear(img, 17, 11);
    CHECK(same.data == img.data);

    Mask mask(17, 11);
    for (auto& v : mask.data) v = rng.uniform(0.0, 1.0) < 0.5 ? 0 : 1;
    Mask msame = resize_nearest(mask, 17, 11);
    CHECK(msame.data == mask.data);
}

TEST_CASE("downscaling preserves constant images and binary masks") {
    Image img(32, 24, 3);
    for (float& v : img.data) v = 0.625f;
    Image half = resize_bilinear(img, 16, 12);
    CHECK(half.width == 16);
    CHECK(half.height == 12);
    for (float v : half.data) CHECK(v == doctest::Approx(0.625f));

    Mask mask(32, 24);
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 32; ++x) mask.at(y, x) = x < 16 ? 1 : 0;
    Mask mhalf = resize_nearest(mask, 16, 12);
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 16; ++x) {
            CHECK((mhalf.at(y, x) == 0 || mhalf.at(y, x) == 1));
            CHECK(mhalf.at(y, x) == (x < 8 ? 1 : 0));
        }

    CHECK_THROWS_AS(resize_bilinear(img, 4, 12), std::invalid_argument);
}

TEST_CASE("normalize_and_resize rescales intrinsics and keeps metric labels") {
    Sample s;
    s.image = Image(64, 53, 3);
    s.mask = Mask(64, 53);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x) s.mask.at(y, x) = 1;
    s.camera = default_camera(64, 53);
    s.base_xyz = {0.12, -0.34, 1.71};
    s.joints_xyz[3] = {0.5, 0.25, 1.0};

    Sample out = normalize_and_resize(s, 32, 26);
    CHECK(out.camera.width == 32);
    CHECK(out.camera.height == 26);
    CHECK(out.camera.fx == doctest::Approx(s.camera.fx * 32.0 / 64.0).epsilon(1e-12));
    CHECK(out.camera.cx == doctest::Approx(s.camera.cx * 32.0 / 64.0).epsilon(1e-12));
    CHECK(out.camera.fy == doctest::Approx(s.camera.fy * 26.0 / 53.0).epsilon(1e-12));
    CHECK(out.camera.cy == doctest::Approx(s.camera.cy * 26.0 / 53.0).epsilon(1e-12));
    CHECK(out.base_xyz.z == s.base_xyz.z);
    CHECK(out.joints_xyz[3].x == s.joints_xyz[3].x);
    CHECK(out.fg_fraction == doctest::Approx(out.mask.foreground_fraction()));
}

TEST_CASE("epoch batching partitions the dataset and reshuffles per epoch") {
    auto batches = epoch_batches(130, 64, 11, 0);
    REQUIRE(batches.size() == 3);
    CHECK(batches[0].size() == 64);
    CHECK(batches[1].size() == 64);
    CHECK(batches[2].size() == 2);

    std::vector<std::size_t> seen;
    for (const auto& b : batches) seen.insert(seen.end(), b.begin(), b.end());
    std::sort(seen.begin(), seen.end());
    for (std::size_t i = 0; i < 130; ++i) CHECK(seen[i] == i);

    auto again = epoch_batches(130, 64, 11, 0);
    CHECK(again == batches);
    auto next_epoch = epoch_batches(130, 64, 11, 1);
    CHECK(next_epoch != batches);

    CHECK(epoch_batches(0, 64, 1, 0).empty());
    CHECK_THROWS_AS(epoch_batches(10, 0, 1, 0), std::invalid_argument);
}

TEST_CASE("written datasets round-trip masks exactly and images to 8-bit precision") {
    fs::path dir = fresh_dir("writer");
    const RobotModel& model = robot_model_for(RobotType::UR5);

    std::vector<Sample> originals;
    {
        DatasetWriter writer(dir.string(), 64, 53, 99);
        for (std::uint64_t i = 0; i < 3; ++i) {
            Sample s = generate_sample(model, 99, i);
            originals.push_back(s);
            writer.add(s, static_cast<int>(i));
        }
        writer.finish();
    }

    DatasetManifest m = load_dataset(dir.string());
    REQUIRE(m.size() == 3);
    CHECK(m.width == 64);
    CHECK(m.height == 53);
    CHECK(m.counts[static_cast<std::size_t>(RobotType::UR5)] == 3);

    for (std::size_t i = 0; i < 3; ++i) {
        Mask mask = load_entry_mask(m, i);
        CHECK(mask.data == originals[i].mask.data);

        Image img = load_entry_image(m, i);
        REQUIRE(img.data.size() == originals[i].image.data.size());
        float worst = 0.0f;
        for (std::size_t k = 0; k < img.data.size(); ++k) {
            worst = std::max(worst, std::abs(img.data[k] - originals[i].image.data[k]));
        }
        CHECK(worst <= 0.5f / 255.0f + 1e-6f);

        CHECK(m.entries[i].recording == static_cast<int>(i));
    }
}

TEST_CASE("manifest serialization preserves every label bit-for-bit") {
    fs::path dir = fresh_dir("manifest");
    const RobotModel& model = robot_model_for(RobotType::UR10);

    DatasetWriter writer(dir.string(), 64, 53, 5);
    Sample s = generate_sample(model, 5, 0);
    writer.add(s);
    DatasetManifest m = writer.finish();

    DatasetManifest r = load_dataset(dir.string());
    REQUIRE(r.size() == 1);
    const ManifestEntry& a = m.entries[0];
    const ManifestEntry& b = r.entries[0];
    CHECK(a.base_xyz.x == b.base_xyz.x);
    CHECK(a.base_xyz.y == b.base_xyz.y);
    CHECK(a.base_xyz.z == b.base_xyz.z);
    for (int j = 0; j < kNumJoints; ++j) {
        CHECK(a.joints_xyz[static_cast<std::size_t>(j)].x == b.joints_xyz[static_cast<std::size_t>(j)].x);
        CHECK(a.joints_xyz[static_cast<std::size_t>(j)].y == b.joints_xyz[static_cast<std::size_t>(j)].y);
        CHECK(a.joints_xyz[static_cast<std::size_t>(j)].z == b.joints_xyz[static_cast<std::size_t>(j)].z);
    }
    for (int j = 0; j < kNumJoints; ++j) {
        CHECK(a.config.angles[static_cast<std::size_t>(j)] == b.config.angles[static_cast<std::size_t>(j)]);
    }
    CHECK(a.camera.fx == b.camera.fx);
    CHECK(a.camera.cy == b.camera.cy);
    for (int i = 0; i < 9; ++i) {
        CHECK(a.camera.pose.rotation.m[static_cast<std::size_t>(i)] ==
              b.camera.pose.rotation.m[static_cast<std::size_t>(i)]);
    }
    CHECK(a.camera.pose.translation.z == b.camera.pose.translation.z);
    CHECK(a.fg_fraction == b.fg_fraction);
    CHECK(a.robot_type == b.robot_type);
}

TEST_CASE("loading rejects missing directories, garbage manifests, and absent files") {
    CHECK_THROWS_AS(load_dataset("/does/not/exist"), DataError);

    fs::path garbage = fresh_dir("garbage");
    std::ofstream(garbage / "manifest.jsonl") << "this is not json\n";
    CHECK_THROWS_AS(load_dataset(garbage.string()), DataError);

    fs::path missing = fresh_dir("missing");
    const RobotModel& model = robot_model_for(RobotType::UR3);
    DatasetWriter writer(missing.string(), 64, 53, 3);
    writer.add(generate_sample(model, 3, 0));
    writer.finish();
    fs::remove(missing / "images" / "000000.png");
    CHECK_THROWS_AS(load_dataset(missing.string()), DataError);
}

TEST_CASE("tensor datasets clip masks, one-hot the type, and copy labels exactly") {
    fs::path dir = fresh_dir("tensor");
    DatasetWriter writer(dir.string(), 64, 53, 17);
    std::array<RobotType, 4> types{RobotType::UR3, RobotType::UR5, RobotType::UR10, RobotType::UR5};
    for (std::uint64_t i = 0; i < types.size(); ++i) {
        writer.add(generate_sample(robot_model_for(types[static_cast<std::size_t>(i)]), 17, i));
    }
    writer.finish();

    DatasetManifest m = load_dataset(dir.string());
    TensorDataset<double> d = load_tensor_dataset<double>(m);
    REQUIRE(d.count == 4);
    CHECK(d.width == 64);
    CHECK(d.height == 53);

    const double lo = kProbEps, hi = 1.0 - kProbEps;
    double fg_mean = 0.0;
    for (std::size_t s = 0; s < d.count; ++s) {
        Mask mask = load_entry_mask(m, s);
        std::size_t fg = 0;
        for (std::size_t i = 0; i < d.pixels(); ++i) {
            double v = d.masks[s * d.pixels() + i];
            CHECK((v == lo || v == hi));
            CHECK((v == hi) == (mask.data[i] != 0));
            fg += mask.data[i] ? 1 : 0;
        }
        fg_mean += static_cast<double>(fg) / static_cast<double>(d.pixels());

        CHECK(d.type_labels[s] == static_cast<int>(types[s]));
        for (int t = 0; t < 3; ++t) {
            CHECK(d.types[s * 3 + static_cast<std::size_t>(t)] ==
                  (t == static_cast<int>(types[s]) ? 1.0 : 0.0));
        }
        CHECK(d.joints[s * 18 + 0] == m.entries[s].joints_xyz[0].x);
        CHECK(d.joints[s * 18 + 17] == m.entries[s].joints_xyz[5].z);
        CHECK(d.bases[s * 3 + 1] == m.entries[s].base_xyz.y);
    }
    CHECK(d.mean_fg_fraction == doctest::Approx(fg_mean / 4.0).epsilon(1e-12));
}

TEST_CASE("gather validates its index list") {
    TensorDataset<double> d;
    d.width = 4;
    d.height = 4;
    d.count = 2;
    d.images.resize(2 * 16 * 3);
    d.masks.resize(2 * 16);
    d.joints.resize(2 * 18);
    d.bases.resize(2 * 3);
    d.types.resize(2 * 3);
    d.type_labels.resize(2);

    CHECK_THROWS_AS(d.gather({}), std::invalid_argument);
    CHECK_THROWS_AS(d.gather({0, 2}), std::invalid_argument);

    Minibatch<double> mb = d.gather({1, 0, 1});
    CHECK(mb.batch() == 3);
    CHECK(mb.images.shape[1] == 4);
    CHECK(mb.masks.shape == std::vector<int>{3, 4, 4});
}

TEST_CASE("minibatches cover the dataset once per epoch") {
    fs::path dir = fresh_dir("mb");
    DatasetWriter writer(dir.string(), 64, 53, 23);
    for (std::uint64_t i = 0; i < 5; ++i) {
        writer.add(generate_sample(robot_model_for(RobotType::UR3), 23, i));
    }
    writer.finish();
    TensorDataset<float> d = load_tensor_dataset<float>(load_dataset(dir.string()));

    auto mbs = minibatches(d, 2, 77, 0);
    REQUIRE(mbs.size() == 3);
    CHECK(mbs[0].batch() == 2);
    CHECK(mbs[2].batch() == 1);
    double total = 0.0, direct = 0.0;
    for (const auto& mb : mbs)
        for (float v : mb.images.v) total += v;
    for (float v : d.images) direct += v;
    CHECK(total == doctest::Approx(direct).epsilon(1e-6));
}
