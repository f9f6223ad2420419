#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "rpnet/eval.hpp"
#include "rpnet/generate.hpp"
#include "rpnet/rng.hpp"

using namespace rpnet;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("rpnet_eval_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TensorDataset<double> tiny_dataset(int n, int width, int height, std::uint64_t seed) {
    GenOptions opt;
    opt.width = width;
    opt.height = height;
    TensorDataset<double> d;
    d.width = width;
    d.height = height;
    d.count = static_cast<std::size_t>(n);
    std::size_t px = d.pixels();
    d.images.resize(d.count * px * 3);
    d.masks.resize(d.count * px);
    d.joints.resize(d.count * 18);
    d.bases.resize(d.count * 3);
    d.types.assign(d.count * 3, 0.0);
    d.type_labels.resize(d.count);
    double fg_sum = 0.0;
    for (int s = 0; s < n; ++s) {
        RobotType type = static_cast<RobotType>(s % 3);
        Sample smp = generate_sample(robot_model_for(type), seed, static_cast<std::uint64_t>(s), opt);
        std::size_t si = static_cast<std::size_t>(s);
        for (std::size_t i = 0; i < px * 3; ++i) d.images[si * px * 3 + i] = smp.image.data[i];
        for (std::size_t i = 0; i < px; ++i) {
            d.masks[si * px + i] = smp.mask.data[i] ? 1.0 - kProbEps : kProbEps;
        }
        for (int j = 0; j < 6; ++j) {
            const Vec3& p = smp.joints_xyz[static_cast<std::size_t>(j)];
            for (int c = 0; c < 3; ++c) {
                d.joints[si * 18 + static_cast<std::size_t>(j) * 3 + static_cast<std::size_t>(c)] =
                    c == 0 ? p.x : (c == 1 ? p.y : p.z);
            }
        }
        d.bases[si * 3 + 0] = smp.base_xyz.x;
        d.bases[si * 3 + 1] = smp.base_xyz.y;
        d.bases[si * 3 + 2] = smp.base_xyz.z;
        d.type_labels[si] = static_cast<int>(type);
        d.types[si * 3 + static_cast<std::size_t>(type)] = 1.0;
        fg_sum += smp.fg_fraction;
    }
    d.mean_fg_fraction = fg_sum / static_cast<double>(n);
    return d;
}

} // namespace

TEST_CASE("mask accuracy identities") {
    Tensor<double> gt({4, 5});
    Rng rng(1);
    for (auto& v : gt.v) v = rng.uniform(0.0, 1.0) < 0.4 ? 1.0 : 0.0;

    Tensor<double> perfect({4, 5});
    for (std::size_t i = 0; i < gt.size(); ++i) perfect.v[i] = gt.v[i] > 0.5 ? 0.9 : 0.1;
    CHECK(mask_accuracy(perfect, gt) == 1.0);

    Tensor<double> complement({4, 5});
    for (std::size_t i = 0; i < gt.size(); ++i) complement.v[i] = gt.v[i] > 0.5 ? 0.1 : 0.9;
    CHECK(mask_accuracy(complement, gt) == 0.0);

    // an all-background prediction scores the background fraction
    Tensor<double> allbg({4, 5});
    for (auto& v : allbg.v) v = 0.1;
    std::size_t fg = 0;
    for (double v : gt.v) fg += v > 0.5 ? 1 : 0;
    double expect = 1.0 - static_cast<double>(fg) / 20.0;
    CHECK(mask_accuracy(allbg, gt) == doctest::Approx(expect).epsilon(1e-15));

    // threshold semantics: a prediction exactly at the threshold counts as background
    Tensor<double> at({1, 1});
    at.v = {0.5};
    Tensor<double> bg({1, 1});
    bg.v = {0.0};
    CHECK(mask_accuracy(at, bg) == 1.0);

    CHECK_THROWS_AS(mask_accuracy(perfect, Tensor<double>({5, 4})), std::invalid_argument);
    CHECK_THROWS_AS(mask_accuracy(Tensor<double>({0}), Tensor<double>({0})),
                    std::invalid_argument);
}

TEST_CASE("argmax breaks ties toward the lowest class index") {
    double row1[3] = {0.2, 0.5, 0.3};
    CHECK(argmax_class(row1, 3) == 1);
    double row2[3] = {0.4, 0.4, 0.2};
    CHECK(argmax_class(row2, 3) == 0);
    double row3[3] = {0.1, 0.45, 0.45};
    CHECK(argmax_class(row3, 3) == 1);
    double row4[3] = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    CHECK(argmax_class(row4, 3) == 0);
}

TEST_CASE("error helpers convert meters to centimeters") {
    double pred[18] = {}, gt[18] = {};
    pred[0 * 3 + 0] = 0.03;
    pred[0 * 3 + 2] = 0.04; // 3-4-5: 5 cm
    pred[5 * 3 + 1] = 0.01;
    auto errs = joint_errors_cm(pred, gt);
    CHECK(errs[0] == doctest::Approx(5.0).epsilon(1e-12));
    for (int j = 1; j < 5; ++j) CHECK(errs[static_cast<std::size_t>(j)] == 0.0);
    CHECK(errs[5] == doctest::Approx(1.0).epsilon(1e-12));

    double p3[3] = {1.0, 2.0, 2.0}, g3[3] = {0.0, 0.0, 0.0};
    CHECK(base_error_cm(p3, g3) == 300.0);
}

TEST_CASE("quartiles interpolate linearly between order statistics") {
    // sorted {1,2,3,4}: positions h = 0.75, 1.5, 2.25
    CHECK(quartiles({4.0, 1.0, 3.0, 2.0}) == std::array<double, 3>{1.75, 2.5, 3.25});
    // five values: exact order statistics at h = 1, 2, 3
    CHECK(quartiles({5.0, 1.0, 3.0, 2.0, 4.0}) == std::array<double, 3>{2.0, 3.0, 4.0});
    // constant data
    CHECK(quartiles({7.0, 7.0, 7.0, 7.0}) == std::array<double, 3>{7.0, 7.0, 7.0});
    CHECK_THROWS_AS(quartiles({1.0, 2.0, 3.0}), std::invalid_argument);

    std::vector<PerSampleEval> samples(3);
    CHECK_THROWS_AS(per_joint_breakdown(samples), std::invalid_argument);
}

TEST_CASE("per-joint breakdown respects joint order") {
    std::vector<PerSampleEval> samples(4);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 6; ++j) {
            samples[i].joint_err_cm[j] = static_cast<double>(j) * 10.0 + static_cast<double>(i + 1);
        }
    }
    auto rows = per_joint_breakdown(samples);
    for (std::size_t j = 0; j < 6; ++j) {
        double base = static_cast<double>(j) * 10.0;
        CHECK(rows[j][0] == doctest::Approx(base + 1.75).epsilon(1e-15));
        CHECK(rows[j][1] == doctest::Approx(base + 2.5).epsilon(1e-15));
        CHECK(rows[j][2] == doctest::Approx(base + 3.25).epsilon(1e-15));
    }
}

TEST_CASE("evaluate fills every field consistently on a real model") {
    ModelConfig mc;
    mc.width = 32;
    mc.height = 26;
    Model<double> model(mc);
    model.init_parameters(3);
    TensorDataset<double> data = tiny_dataset(6, mc.width, mc.height, 41);

    EvalOptions opt;
    opt.batch_size = 4; // forces two batches
    EvalReport rep = evaluate(model, data, opt);

    CHECK(rep.sample_count == 6);
    REQUIRE(rep.samples.size() == 6);
    CHECK(rep.mask_accuracy >= 0.0);
    CHECK(rep.mask_accuracy <= 1.0);
    CHECK(rep.type_accuracy >= 0.0);
    CHECK(rep.type_accuracy <= 1.0);
    CHECK(rep.has_quartiles);
    CHECK(rep.mean_fg_fraction == doctest::Approx(data.mean_fg_fraction).epsilon(1e-9));
    CHECK(rep.majority_baseline == doctest::Approx(1.0 - rep.mean_fg_fraction).epsilon(1e-15));

    // aggregate means equal the per-sample means
    double joint_mean = 0.0, base_mean = 0.0, acc_mean = 0.0;
    int correct = 0;
    for (const PerSampleEval& s : rep.samples) {
        for (double e : s.joint_err_cm) joint_mean += e;
        base_mean += s.base_err_cm;
        acc_mean += s.mask_accuracy;
        correct += s.pred_type == s.gt_type ? 1 : 0;
        CHECK(s.gt_type == data.type_labels[static_cast<std::size_t>(&s - rep.samples.data())]);
    }
    CHECK(rep.joint_error_mean_cm == doctest::Approx(joint_mean / 36.0).epsilon(1e-12));
    CHECK(rep.base_error_mean_cm == doctest::Approx(base_mean / 6.0).epsilon(1e-12));
    CHECK(rep.type_accuracy == doctest::Approx(correct / 6.0).epsilon(1e-15));

    // pooled pixel accuracy equals the per-image mean here (equal-sized images)
    EvalOptions per_img = opt;
    per_img.per_image_mask_accuracy = true;
    EvalReport rep2 = evaluate(model, data, per_img);
    CHECK(rep2.mask_accuracy == doctest::Approx(acc_mean / 6.0).epsilon(1e-12));
    CHECK(rep.mask_accuracy == doctest::Approx(rep2.mask_accuracy).epsilon(1e-9));

    // per-joint means sum to six times the overall mean
    double sum = 0.0;
    for (double m : rep.joint_error_mean_per_joint_cm) sum += m;
    CHECK(sum == doctest::Approx(6.0 * rep.joint_error_mean_cm).epsilon(1e-12));

    CHECK_THROWS_AS(evaluate(model, TensorDataset<double>{}), DataError);
}

TEST_CASE("a perfect oracle scores ones and zeroes") {
    // feed the ground truth back as predictions via direct report assembly
    TensorDataset<double> data = tiny_dataset(4, 32, 26, 42);
    std::size_t px = data.pixels();

    std::vector<PerSampleEval> samples;
    for (std::size_t s = 0; s < data.count; ++s) {
        PerSampleEval e;
        Tensor<double> pred({26, 32}), gt({26, 32});
        for (std::size_t i = 0; i < px; ++i) {
            gt.v[i] = data.masks[s * px + i];
            pred.v[i] = gt.v[i] > 0.5 ? 0.99 : 0.01;
        }
        e.mask_accuracy = mask_accuracy(pred, gt);
        e.joint_err_cm = joint_errors_cm(&data.joints[s * 18], &data.joints[s * 18]);
        e.base_err_cm = base_error_cm(&data.bases[s * 3], &data.bases[s * 3]);
        CHECK(e.mask_accuracy == 1.0);
        for (double err : e.joint_err_cm) CHECK(err == 0.0);
        CHECK(e.base_err_cm == 0.0);
        samples.push_back(e);
    }
    auto rows = per_joint_breakdown(samples);
    for (const auto& row : rows)
        for (double q : row) CHECK(q == 0.0);
}

TEST_CASE("reports round-trip through json and render the reference row") {
    ModelConfig mc;
    mc.width = 32;
    mc.height = 26;
    Model<double> model(mc);
    model.init_parameters(5);
    TensorDataset<double> data = tiny_dataset(5, mc.width, mc.height, 43);
    EvalReport rep = evaluate(model, data);

    TrainLog log;
    TrainRecord r0;
    r0.iteration = 0;
    r0.lr = 0.01;
    r0.train = {1.0, 2.0, 3.0, 4.0, 5.0};
    r0.has_test = true;
    r0.test_l_final = 6.5;
    log.records.push_back(r0);

    fs::path dir = fresh_dir("report");
    emit_report(rep, &log, dir.string());
    REQUIRE(fs::exists(dir / "report.json"));
    REQUIRE(fs::exists(dir / "report.md"));
    REQUIRE(fs::exists(dir / "per_joint.csv"));
    REQUIRE(fs::exists(dir / "loss_curve.csv"));

    EvalReport back = load_report_json((dir / "report.json").string());
    CHECK(back.mask_accuracy == rep.mask_accuracy);
    CHECK(back.type_accuracy == rep.type_accuracy);
    CHECK(back.joint_error_mean_cm == rep.joint_error_mean_cm);
    CHECK(back.base_error_mean_cm == rep.base_error_mean_cm);
    CHECK(back.majority_baseline == rep.majority_baseline);
    CHECK(back.mean_fg_fraction == rep.mean_fg_fraction);
    CHECK(back.sample_count == rep.sample_count);
    CHECK(back.has_quartiles == rep.has_quartiles);
    for (std::size_t j = 0; j < 6; ++j) {
        CHECK(back.joint_error_mean_per_joint_cm[j] == rep.joint_error_mean_per_joint_cm[j]);
        for (std::size_t q = 0; q < 3; ++q) {
            CHECK(back.joint_quartiles_cm[j][q] == rep.joint_quartiles_cm[j][q]);
        }
    }

    // the markdown carries a clearly labeled reference row next to the measured one
    std::string md = slurp(dir / "report.md");
    CHECK(md.find("measured") != std::string::npos);
    CHECK(md.find("reference") != std::string::npos);
    CHECK(md.find("98") != std::string::npos);   // 98% mask accuracy
    CHECK(md.find("3.16") != std::string::npos); // joint error cm
    CHECK(md.find("2.74") != std::string::npos); // base error cm

    // per-joint csv: header + 6 rows
    std::string csv = slurp(dir / "per_joint.csv");
    CHECK(csv.find("joint,") == 0);
    int lines = 0;
    for (char ch : csv) lines += ch == '\n' ? 1 : 0;
    CHECK(lines == 7);

    // loss curve csv mirrors the train log
    std::string curve = slurp(dir / "loss_curve.csv");
    CHECK(curve.find("iteration,") == 0);

    CHECK_THROWS_AS(load_report_json((dir / "nope.json").string()), DataError);
}

TEST_CASE("report emission is deterministic") {
    ModelConfig mc;
    mc.width = 32;
    mc.height = 26;
    Model<double> model(mc);
    model.init_parameters(6);
    TensorDataset<double> data = tiny_dataset(4, mc.width, mc.height, 44);

    fs::path da = fresh_dir("det_a");
    fs::path db = fresh_dir("det_b");
    EvalReport ra = evaluate(model, data);
    EvalReport rb = evaluate(model, data);
    emit_report(ra, nullptr, da.string());
    emit_report(rb, nullptr, db.string());
    CHECK(slurp(da / "report.json") == slurp(db / "report.json"));
    CHECK(slurp(da / "report.md") == slurp(db / "report.md"));
    CHECK(slurp(da / "per_joint.csv") == slurp(db / "per_joint.csv"));
    CHECK(!fs::exists(da / "loss_curve.csv")); // no train log supplied
}
