#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "rpnet/generate.hpp"
#include "rpnet/trainer.hpp"

using namespace rpnet;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("rpnet_trainer_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// small in-memory dataset built straight from generated samples
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
            d.joints[si * 18 + static_cast<std::size_t>(j) * 3 + 0] = p.x;
            d.joints[si * 18 + static_cast<std::size_t>(j) * 3 + 1] = p.y;
            d.joints[si * 18 + static_cast<std::size_t>(j) * 3 + 2] = p.z;
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

ModelConfig tiny_model_config() {
    ModelConfig cfg;
    cfg.width = 32;
    cfg.height = 26;
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool records_equal(const TrainRecord& a, const TrainRecord& b) {
    return a.iteration == b.iteration && a.lr == b.lr && a.has_train == b.has_train &&
           a.has_test == b.has_test && a.train.l_final == b.train.l_final &&
           a.train.l_mask == b.train.l_mask && a.train.l_jcoords == b.train.l_jcoords &&
           a.train.l_bcoords == b.train.l_bcoords && a.train.l_type == b.train.l_type &&
           a.test_l_final == b.test_l_final;
}

} // namespace

TEST_CASE("the learning-rate schedule hits both endpoints exactly") {
    TrainConfig cfg;
    cfg.lr_start = 0.02;
    cfg.lr_end = 0.0004;
    cfg.total_iterations = 1000;

    CHECK(lr_at(0, cfg) == 0.02);
    CHECK(lr_at(999, cfg) == 0.0004);
    for (int t = 1; t < 1000; ++t) {
        CHECK(lr_at(t, cfg) < lr_at(t - 1, cfg));
        CHECK(lr_at(t, cfg) >= cfg.lr_end);
    }

    // geometric midpoint
    TrainConfig odd = cfg;
    odd.total_iterations = 1001;
    CHECK(lr_at(500, odd) == doctest::Approx(std::sqrt(0.02 * 0.0004)).epsilon(1e-14));

    TrainConfig flat = cfg;
    flat.lr_end = flat.lr_start;
    CHECK(lr_at(123, flat) == flat.lr_start);

    CHECK_THROWS_AS(lr_at(-1, cfg), std::out_of_range);
    CHECK_THROWS_AS(lr_at(1000, cfg), std::out_of_range);
}

TEST_CASE("train config validation catches each broken field") {
    TrainConfig cfg;
    cfg.validate();

    TrainConfig bad = cfg;
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.lr_end = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.lr_end = bad.lr_start * 2.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.total_iterations = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.momentum = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.stop_after = bad.total_iterations + 1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.checkpoint_every = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("a zero learning rate leaves parameters untouched") {
    ModelConfig mc = tiny_model_config();
    Model<double> model(mc);
    model.init_parameters(5);
    TensorDataset<double> data = tiny_dataset(2, mc.width, mc.height, 31);

    std::vector<std::vector<double>> before;
    for (int i = 0; i < model.num_blocks(); ++i) before.push_back(model.block(i).v);

    TrainConfig cfg;
    OptimizerState<double> state;
    train_step(model, data.gather({0, 1}), 0.0, state, cfg);
    for (int i = 0; i < model.num_blocks(); ++i) {
        CHECK(model.block(i).v == before[static_cast<std::size_t>(i)]);
    }
}

TEST_CASE("momentum zero reproduces plain sgd bit-for-bit") {
    ModelConfig mc = tiny_model_config();
    TensorDataset<double> data = tiny_dataset(3, mc.width, mc.height, 32);

    Model<double> a(mc), b(mc);
    a.init_parameters(6);
    b.init_parameters(6);

    TrainConfig ca;
    ca.optimizer = OptimizerKind::SgdMomentum;
    ca.momentum = 0.0;
    TrainConfig cb;
    cb.optimizer = OptimizerKind::Sgd;

    OptimizerState<double> sa, sb;
    for (int step = 0; step < 3; ++step) {
        Minibatch<double> mb = data.gather({0, 1, 2});
        train_step(a, mb, 0.01, sa, ca);
        train_step(b, mb, 0.01, sb, cb);
    }
    for (int i = 0; i < a.num_blocks(); ++i) CHECK(a.block(i).v == b.block(i).v);
}

TEST_CASE("sgd with momentum memorizes a single sample") {
    ModelConfig mc = tiny_model_config();
    Model<double> model(mc);
    model.init_parameters(7);
    TensorDataset<double> data = tiny_dataset(1, mc.width, mc.height, 33);

    TrainConfig cfg;
    cfg.batch_size = 1;
    cfg.lr_start = 0.03;
    cfg.lr_end = 0.003;
    cfg.total_iterations = 500;
    cfg.checkpoint_every = 250;

    double initial = dataset_l_final(model, data, cfg);
    TrainLog log = train(model, data, data, cfg);
    double final_loss = dataset_l_final(model, data, cfg);

    CHECK(final_loss < 0.1 * initial);
    REQUIRE(!log.records.empty());
    CHECK(log.records.back().iteration == 500);
    CHECK(log.records.back().has_test);
    CHECK(log.records.back().test_l_final == doctest::Approx(final_loss).epsilon(1e-12));
}

TEST_CASE("training logs follow the checkpoint cadence") {
    ModelConfig mc = tiny_model_config();
    Model<double> model(mc);
    model.init_parameters(8);
    TensorDataset<double> data = tiny_dataset(2, mc.width, mc.height, 34);

    TrainConfig cfg;
    cfg.batch_size = 2;
    cfg.total_iterations = 6;
    cfg.checkpoint_every = 2;

    TrainLog log = train(model, data, data, cfg);
    REQUIRE(log.records.size() == 7);
    for (int t = 0; t < 6; ++t) {
        const TrainRecord& r = log.records[static_cast<std::size_t>(t)];
        CHECK(r.iteration == t);
        CHECK(r.has_train);
        CHECK(r.lr == lr_at(t, cfg));
        CHECK(r.has_test == (t % 2 == 0));
    }
    const TrainRecord& last = log.records.back();
    CHECK(last.iteration == 6);
    CHECK(!last.has_train);
    CHECK(last.has_test);
}

TEST_CASE("a paused-and-resumed run is bit-identical to an uninterrupted one") {
    ModelConfig mc = tiny_model_config();
    TensorDataset<double> data = tiny_dataset(4, mc.width, mc.height, 35);
    TensorDataset<double> test = tiny_dataset(2, mc.width, mc.height, 36);

    fs::path dir_paused = fresh_dir("paused");
    fs::path dir_straight = fresh_dir("straight");

    TrainConfig base;
    base.batch_size = 2;
    base.total_iterations = 14;
    base.checkpoint_every = 5;
    base.lr_start = 0.01;
    base.lr_end = 0.001;

    // leg 1: pause at iteration 6 without shortening the schedule
    Model<double> paused(mc);
    paused.init_parameters(9);
    OptimizerState<double> pstate;
    TrainConfig leg1 = base;
    leg1.stop_after = 6;
    leg1.out_dir = dir_paused.string();
    TrainLog log1 = train(paused, data, test, leg1, 0, &pstate);

    // leg 2: reload from disk and continue to the end
    Model<double> resumed(mc);
    OptimizerState<double> rstate;
    int start = load_training_checkpoint(resumed, rstate, dir_paused.string());
    CHECK(start == 6);
    TrainConfig leg2 = base;
    leg2.out_dir = dir_paused.string();
    TrainLog log2 = train(resumed, data, test, leg2, start, &rstate);

    // reference: the same schedule uninterrupted
    Model<double> straight(mc);
    straight.init_parameters(9);
    TrainConfig full = base;
    full.out_dir = dir_straight.string();
    TrainLog logf = train(straight, data, test, full);

    for (int i = 0; i < straight.num_blocks(); ++i) {
        CHECK(resumed.block(i).v == straight.block(i).v);
    }
    CHECK(slurp(dir_paused / "checkpoint.rpnn") == slurp(dir_straight / "checkpoint.rpnn"));

    // the concatenated logs replay the uninterrupted record stream
    std::vector<TrainRecord> merged;
    for (const TrainRecord& r : log1.records) {
        if (r.iteration < start) merged.push_back(r); // drop leg 1's pause record
    }
    for (const TrainRecord& r : log2.records) merged.push_back(r);
    REQUIRE(merged.size() == logf.records.size());
    for (std::size_t i = 0; i < merged.size(); ++i) {
        CHECK(records_equal(merged[i], logf.records[i]));
    }
}

TEST_CASE("training checkpoints restore the optimizer state exactly") {
    ModelConfig mc = tiny_model_config();
    Model<double> model(mc);
    model.init_parameters(10);
    TensorDataset<double> data = tiny_dataset(2, mc.width, mc.height, 37);

    TrainConfig cfg;
    OptimizerState<double> state;
    train_step(model, data.gather({0, 1}), 0.01, state, cfg);
    train_step(model, data.gather({1, 0}), 0.01, state, cfg);

    fs::path dir = fresh_dir("ckpt");
    save_training_checkpoint(model, state, 2, dir.string());

    Model<double> loaded(mc);
    OptimizerState<double> lstate;
    int next = load_training_checkpoint(loaded, lstate, dir.string());
    CHECK(next == 2);
    for (int i = 0; i < model.num_blocks(); ++i) {
        CHECK(loaded.block(i).v == model.block(i).v);
        CHECK(lstate.velocity[static_cast<std::size_t>(i)].v ==
              state.velocity[static_cast<std::size_t>(i)].v);
    }

    fs::remove(dir / "resume.txt");
    Model<double> broken(mc);
    OptimizerState<double> bstate;
    CHECK_THROWS_AS(load_training_checkpoint(broken, bstate, dir.string()), DataError);
}

TEST_CASE("the csv log round-trips every field") {
    TrainLog log;
    TrainRecord a;
    a.iteration = 0;
    a.lr = 0.0123456789012345678;
    a.train = {1.25, 0.5, 0.125, 0.0625, 2.0};
    a.has_test = true;
    a.test_l_final = 3.14159265358979312;
    log.records.push_back(a);
    TrainRecord b;
    b.iteration = 1;
    b.lr = 1e-300;
    b.train = {0.1, 0.2, 0.3, 0.4, 0.5};
    b.has_test = false;
    log.records.push_back(b);
    TrainRecord c;
    c.iteration = 2;
    c.has_train = false;
    c.has_test = true;
    c.test_l_final = 0.75;
    log.records.push_back(c);

    fs::path path = fs::temp_directory_path() / "rpnet_trainer_log.csv";
    save_train_log_csv(log, path.string());
    TrainLog r = load_train_log_csv(path.string());
    REQUIRE(r.records.size() == log.records.size());
    for (std::size_t i = 0; i < r.records.size(); ++i) {
        CHECK(records_equal(r.records[i], log.records[i]));
    }
    fs::remove(path);

    std::ofstream(path) << "not,a,train,log\n";
    CHECK_THROWS_AS(load_train_log_csv(path.string()), DataError);
    fs::remove(path);
    CHECK_THROWS_AS(load_train_log_csv(path.string()), DataError);
}

TEST_CASE("train rejects bad start iterations and empty datasets") {
    ModelConfig mc = tiny_model_config();
    Model<double> model(mc);
    model.init_parameters(11);
    TensorDataset<double> data = tiny_dataset(2, mc.width, mc.height, 38);
    TensorDataset<double> empty;

    TrainConfig cfg;
    cfg.total_iterations = 4;
    CHECK_THROWS_AS(train(model, data, empty, cfg), DataError);
    CHECK_THROWS_AS(train(model, empty, data, cfg), DataError);
    CHECK_THROWS_AS(train(model, data, data, cfg, 5), std::invalid_argument);
    CHECK_THROWS_AS(train(model, data, data, cfg, -1), std::invalid_argument);
}

TEST_CASE("dataset loss is the sample-weighted batch mean") {
    ModelConfig mc = tiny_model_config();
    Model<double> model(mc);
    model.init_parameters(12);
    TensorDataset<double> data = tiny_dataset(3, mc.width, mc.height, 39);

    TrainConfig cfg;
    cfg.batch_size = 2; // forces a 2+1 split
    double loss = dataset_l_final(model, data, cfg);

    auto eval_batch = [&](const std::vector<std::size_t>& idx) {
        Minibatch<double> mb = data.gather(idx);
        auto out = model.forward(to_nchw(mb.images));
        return combined_loss(out.mask_prob, out.joints, out.base, out.type_prob, mb,
                             cfg.loss_weights)
            .breakdown.l_final;
    };
    double manual = (eval_batch({0, 1}) * 2.0 + eval_batch({2}) * 1.0) / 3.0;
    CHECK(loss == doctest::Approx(manual).epsilon(1e-14));

    TrainConfig big = cfg;
    big.batch_size = 64; // single batch; same mean
    CHECK(dataset_l_final(model, data, big) == doctest::Approx(manual).epsilon(1e-12));
}
