#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "json.hpp"

#include "rpnet/batches.hpp"
#include "rpnet/dataset.hpp"
#include "rpnet/errors.hpp"
#include "rpnet/eval.hpp"
#include "rpnet/generate.hpp"
#include "rpnet/gradcheck.hpp"
#include "rpnet/model.hpp"
#include "rpnet/png_io.hpp"
#include "rpnet/trainer.hpp"

namespace {

using namespace rpnet;

struct GlobalOpts {
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    int threads = 0; // 0 keeps the runtime default
    std::string precision = "f32";
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

void print_config(const std::string& subcommand, const GlobalOpts& g, const KeyValues& kv) {
    std::printf("resolved config:\n");
    std::printf("  subcommand = %s\n", subcommand.c_str());
    std::printf("  seed = %llu\n", static_cast<unsigned long long>(g.seed));
    std::printf("  out_dir = %s\n", g.out_dir.c_str());
    std::printf("  threads = %d\n", g.threads);
    std::printf("  precision = %s\n", g.precision.c_str());
    for (const auto& [k, v] : kv) std::printf("  %s = %s\n", k.c_str(), v.c_str());
    std::fflush(stdout);
}

// ---------------------------------------------------------------- gen-data

struct GenDataOpts {
    std::string type = "all";
    std::int64_t count = 100;
    bool paper_analog = false;
    int width = 64, height = 53;
    double fg_min = 0.04, fg_max = 0.20;
    double calib_sigma_t = 0.0026;
    bool no_calib_noise = false;
    int max_attempts = 64;
};

void cmd_gen_data(const GlobalOpts& g, const GenDataOpts& o) {
    GenOptions gen;
    gen.width = o.width;
    gen.height = o.height;
    gen.fg_min = o.fg_min;
    gen.fg_max = o.fg_max;
    gen.max_attempts = o.max_attempts;
    gen.sample.calib_sigma_t = o.no_calib_noise ? 0.0 : o.calib_sigma_t;

    KeyValues kv = {{"paper_analog", o.paper_analog ? "true" : "false"},
                    {"type", o.type},
                    {"count", std::to_string(o.count)},
                    {"width", std::to_string(o.width)},
                    {"height", std::to_string(o.height)},
                    {"fg_band", num(o.fg_min) + " .. " + num(o.fg_max)},
                    {"calib_sigma_t", num(gen.sample.calib_sigma_t)},
                    {"max_attempts", std::to_string(o.max_attempts)}};
    print_config("gen-data", g, kv);

    if (o.paper_analog) {
        PaperAnalogResult res = generate_paper_analog(g.out_dir, g.seed, gen);
        for (const RecordingInfo& r : res.recordings) {
            std::printf("recording %d: %-4s %4zu samples, mean fg %.3f, calibration shift %.3f cm\n",
                        r.recording, robot_type_name(r.type), r.count, r.mean_fg,
                        100.0 * r.calib_shift_m);
        }
        std::printf("wrote %zu samples to %s\n", res.manifest.size(), g.out_dir.c_str());
        return;
    }

    std::array<std::int64_t, kNumRobotTypes> counts{};
    if (o.type == "all") {
        counts.fill(o.count);
    } else {
        counts[static_cast<std::size_t>(robot_type_from_name(o.type))] = o.count;
    }
    DatasetManifest m = generate_random_dataset(g.out_dir, counts, g.seed, gen);
    double fg = 0.0;
    for (const auto& e : m.entries) fg += e.fg_fraction;
    std::printf("wrote %zu samples to %s (UR3 %lld, UR5 %lld, UR10 %lld), mean fg %.3f\n",
                m.size(), g.out_dir.c_str(), static_cast<long long>(m.counts[0]),
                static_cast<long long>(m.counts[1]), static_cast<long long>(m.counts[2]),
                m.size() ? fg / static_cast<double>(m.size()) : 0.0);
}

// ------------------------------------------------------------------- train

struct TrainOpts {
    std::string dataset_dir;
    double split_ratio = 0.8;
    bool stratify = false;
    int iterations = 2000;
    int batch = 64;
    double lr_start = 0.001;
    double lr_end = 0.000001;
    std::string optimizer = "sgd-momentum";
    double momentum = 0.9;
    int checkpoint_every = 200;
    int stop_after = 0;
    bool resume = false;
    std::string model_config;
    double w_mask = 1.0, w_jcoords = 1.5, w_bcoords = 1.5, w_type = 0.3;
    bool eq3_literal = false;
    int progress_every = 100;
};

ModelConfig resolve_model_config(const TrainOpts& o, const std::string& out_dir, int w, int h) {
    std::string saved = (std::filesystem::path(out_dir) / "model_config.txt").string();
    if (!o.model_config.empty()) return load_model_config(o.model_config);
    if (o.resume) {
        if (!std::filesystem::exists(saved))
            throw DataError("--resume needs " + saved + " from the interrupted run");
        return load_model_config(saved);
    }
    ModelConfig cfg;
    cfg.width = w;
    cfg.height = h;
    return cfg;
}

TrainConfig to_train_config(const GlobalOpts& g, const TrainOpts& o) {
    TrainConfig cfg;
    cfg.batch_size = o.batch;
    cfg.lr_start = o.lr_start;
    cfg.lr_end = o.lr_end;
    cfg.total_iterations = o.iterations;
    cfg.seed = g.seed;
    cfg.optimizer = o.optimizer == "sgd" ? OptimizerKind::Sgd : OptimizerKind::SgdMomentum;
    cfg.momentum = o.momentum;
    cfg.checkpoint_every = o.checkpoint_every;
    cfg.stop_after = o.stop_after;
    cfg.loss_weights = LossWeights{o.w_mask, o.w_jcoords, o.w_bcoords, o.w_type};
    cfg.mask_mode = o.eq3_literal ? MaskLossMode::Literal : MaskLossMode::Standard;
    cfg.out_dir = g.out_dir;
    return cfg;
}

template <typename T>
void run_train(const GlobalOpts& g, const TrainOpts& o) {
    DatasetManifest manifest = load_dataset(o.dataset_dir);
    auto [train_part, test_part] = split_dataset(manifest, o.split_ratio, g.seed, o.stratify);
    TensorDataset<T> train_set = load_tensor_dataset<T>(train_part);
    TensorDataset<T> test_set = load_tensor_dataset<T>(test_part);
    std::printf("dataset: %zu train / %zu test at %dx%d, mean fg %.3f\n", train_set.count,
                test_set.count, train_set.width, train_set.height, train_set.mean_fg_fraction);

    ModelConfig mc = resolve_model_config(o, g.out_dir, train_set.width, train_set.height);
    Model<T> model(mc);

    std::filesystem::create_directories(g.out_dir);
    std::string log_path = (std::filesystem::path(g.out_dir) / "train_log.csv").string();
    TrainConfig cfg = to_train_config(g, o);

    int start = 0;
    OptimizerState<T> state;
    TrainLog merged;
    if (o.resume) {
        start = load_training_checkpoint(model, state, g.out_dir);
        if (std::filesystem::exists(log_path)) {
            for (const TrainRecord& r : load_train_log_csv(log_path).records) {
                if (r.iteration < start) merged.records.push_back(r);
            }
        }
        std::printf("resuming at iteration %d\n", start);
    } else {
        model.init_parameters(mix_seed(g.seed, 0x696e6974ULL));
        save_model_config(mc, (std::filesystem::path(g.out_dir) / "model_config.txt").string());
    }
    std::printf("model: %lld parameters\n", static_cast<long long>(model.parameter_count()));

    auto on_record = [&](const TrainRecord& r) {
        if (!r.has_train) {
            std::printf("iter %5d/%d done, test l_final %.5f\n", r.iteration, o.iterations,
                        r.test_l_final);
        } else if (r.has_test || (o.progress_every > 0 && r.iteration % o.progress_every == 0)) {
            std::printf("iter %5d/%d lr %.3e l_final %.5f (mask %.4f joints %.4f base %.4f type %.4f)",
                        r.iteration, o.iterations, r.lr, r.train.l_final, r.train.l_mask,
                        r.train.l_jcoords, r.train.l_bcoords, r.train.l_type);
            if (r.has_test) std::printf(" test %.5f", r.test_l_final);
            std::printf("\n");
        }
        std::fflush(stdout);
    };

    TrainLog log = train(model, train_set, test_set, cfg, start, &state, on_record);
    if (o.resume) {
        for (const TrainRecord& r : log.records) merged.records.push_back(r);
        save_train_log_csv(merged, log_path);
    }
    std::printf("checkpoint: %s\n", (std::filesystem::path(g.out_dir) / "checkpoint.rpnn").string().c_str());
    std::printf("train log: %s\n", log_path.c_str());
}

// -------------------------------------------------------------------- eval

struct EvalOpts {
    std::string dataset_dir;
    double split_ratio = 0.8;
    bool stratify = false;
    std::string split = "test";
    std::string checkpoint;
    std::string model_config;
    double threshold = 0.5;
    bool per_image = false;
    int batch = 64;
    std::string train_log;
};

template <typename T>
Model<T> load_model_for(const std::string& checkpoint, const std::string& config_path) {
    std::string cfg_path = config_path;
    if (cfg_path.empty()) {
        cfg_path = (std::filesystem::path(checkpoint).parent_path() / "model_config.txt").string();
    }
    ModelConfig cfg =
        std::filesystem::exists(cfg_path) ? load_model_config(cfg_path) : ModelConfig{};
    Model<T> model(cfg);
    model.load_from_checkpoint(load_checkpoint(checkpoint));
    return model;
}

template <typename T>
void run_eval(const GlobalOpts& g, const EvalOpts& o) {
    DatasetManifest manifest = load_dataset(o.dataset_dir);
    DatasetManifest part = manifest;
    if (o.split != "all") {
        auto [train_part, test_part] = split_dataset(manifest, o.split_ratio, g.seed, o.stratify);
        part = o.split == "train" ? train_part : test_part;
    }
    TensorDataset<T> data = load_tensor_dataset<T>(part);

    Model<T> model = load_model_for<T>(o.checkpoint, o.model_config);
    if (model.config().width != data.width || model.config().height != data.height) {
        throw DataError("checkpoint resolution " + std::to_string(model.config().width) + "x" +
                        std::to_string(model.config().height) + " does not match dataset " +
                        std::to_string(data.width) + "x" + std::to_string(data.height));
    }

    EvalOptions opts;
    opts.threshold = o.threshold;
    opts.per_image_mask_accuracy = o.per_image;
    opts.batch_size = o.batch;
    EvalReport rep = evaluate(model, data, opts);

    std::filesystem::create_directories(g.out_dir);
    TrainLog log;
    bool has_log = false;
    std::string log_path = o.train_log;
    if (log_path.empty()) {
        std::string guess = (std::filesystem::path(o.checkpoint).parent_path() / "train_log.csv").string();
        if (std::filesystem::exists(guess)) log_path = guess;
    }
    if (!log_path.empty()) {
        log = load_train_log_csv(log_path);
        has_log = true;
    }
    emit_report(rep, has_log ? &log : nullptr, g.out_dir);

    std::printf("samples: %zu\n", rep.sample_count);
    std::printf("mask accuracy:  %.4f   (reference %.3f, majority baseline %.4f)\n",
                rep.mask_accuracy, EvalReport::kRefMaskAccuracy, rep.majority_baseline);
    std::printf("type accuracy:  %.4f   (reference %.3f)\n", rep.type_accuracy,
                EvalReport::kRefTypeAccuracy);
    std::printf("joint error:    %.3f cm (reference %.2f cm)\n", rep.joint_error_mean_cm,
                EvalReport::kRefJointErrorCm);
    std::printf("base error:     %.3f cm (reference %.2f cm)\n", rep.base_error_mean_cm,
                EvalReport::kRefBaseErrorCm);

    // measured timing goes to stdout only; report files stay byte-reproducible
    std::vector<std::size_t> one{0};
    Minibatch<T> probe = data.gather(one);
    auto [out, seconds] = model.forward_timed(to_nchw(probe.images));
    (void)out;
    std::printf("forward pass:   %.2f ms single image (reference %.1f ms)\n", 1e3 * seconds,
                EvalReport::kRefForwardMs);
    std::printf("report files in %s\n", g.out_dir.c_str());
}

// ------------------------------------------------------------------- infer

struct InferOpts {
    std::string checkpoint;
    std::string model_config;
    std::string image;
    std::string dataset_dir;
    std::size_t index = 0;
    double threshold = 0.5;
};

template <typename T>
void run_infer(const GlobalOpts& g, const InferOpts& o) {
    if (o.image.empty() == o.dataset_dir.empty()) {
        throw std::invalid_argument("infer needs exactly one of --image or --dataset-dir");
    }

    Model<T> model = load_model_for<T>(o.checkpoint, o.model_config);
    int mw = model.config().width, mh = model.config().height;

    Image input;
    CameraModel camera;
    bool default_cam = false;
    if (!o.image.empty()) {
        input = read_png_rgb(o.image);
        camera = default_camera(input.width, input.height);
        default_cam = true;
    } else {
        DatasetManifest manifest = load_dataset(o.dataset_dir);
        if (o.index >= manifest.size()) {
            throw DataError("--index " + std::to_string(o.index) + " outside dataset of " +
                            std::to_string(manifest.size()));
        }
        input = load_entry_image(manifest, o.index);
        camera = manifest.entries[o.index].camera;
    }

    Image net_in = input;
    CameraModel net_cam = camera;
    if (input.width != mw || input.height != mh) {
        net_in = resize_bilinear(input, mw, mh);
        double rw = static_cast<double>(mw) / input.width;
        double rh = static_cast<double>(mh) / input.height;
        net_cam.fx *= rw;
        net_cam.cx *= rw;
        net_cam.fy *= rh;
        net_cam.cy *= rh;
        net_cam.width = mw;
        net_cam.height = mh;
    }

    Tensor<T> images({1, mh, mw, 3});
    for (std::size_t i = 0; i < images.size(); ++i) images.v[i] = static_cast<T>(net_in.data[i]);
    auto [out, seconds] = model.forward_timed(to_nchw(images));

    Mask net_mask(mw, mh);
    double fg = 0.0;
    for (int y = 0; y < mh; ++y) {
        for (int x = 0; x < mw; ++x) {
            bool on = static_cast<double>(out.mask_prob.v[static_cast<std::size_t>(y) *
                                                          static_cast<std::size_t>(mw) +
                                                          static_cast<std::size_t>(x)]) > o.threshold;
            net_mask.at(y, x) = on ? 1 : 0;
            fg += on ? 1.0 : 0.0;
        }
    }
    fg /= static_cast<double>(mw) * mh;
    Mask out_mask = (input.width != mw || input.height != mh)
                        ? resize_nearest(net_mask, input.width, input.height)
                        : net_mask;

    std::filesystem::create_directories(g.out_dir);
    std::string mask_path = (std::filesystem::path(g.out_dir) / "infer_mask.png").string();
    write_png_gray8(mask_path, out_mask);

    int pred_type = argmax_class(out.type_prob.data(), 3);
    nlohmann::ordered_json j;
    j["type"] = robot_type_name(static_cast<RobotType>(pred_type));
    j["type_prob"] = {static_cast<double>(out.type_prob.v[0]),
                      static_cast<double>(out.type_prob.v[1]),
                      static_cast<double>(out.type_prob.v[2])};
    j["base_xyz"] = {static_cast<double>(out.base.v[0]), static_cast<double>(out.base.v[1]),
                     static_cast<double>(out.base.v[2])};
    auto joints = nlohmann::ordered_json::array();
    auto joints_px = nlohmann::ordered_json::array();
    for (int jt = 0; jt < 6; ++jt) {
        double x = static_cast<double>(out.joints.v[static_cast<std::size_t>(jt) * 3 + 0]);
        double y = static_cast<double>(out.joints.v[static_cast<std::size_t>(jt) * 3 + 1]);
        double z = static_cast<double>(out.joints.v[static_cast<std::size_t>(jt) * 3 + 2]);
        joints.push_back({x, y, z});
        // predicted points live in the camera frame; project with the
        // original-resolution intrinsics so pixels index the input image
        if (z > 1e-9) {
            joints_px.push_back({camera.fx * x / z + camera.cx, camera.fy * y / z + camera.cy});
        } else {
            joints_px.push_back(nullptr);
        }
    }
    j["joints_xyz"] = joints;
    j["joints_px"] = joints_px;
    j["mask_fg_fraction"] = fg;
    j["threshold"] = o.threshold;
    j["camera"] = default_cam ? "default" : "dataset";
    std::string json_path = (std::filesystem::path(g.out_dir) / "infer.json").string();
    std::ofstream jf(json_path, std::ios::binary);
    if (!jf) throw DataError("cannot write " + json_path);
    jf << j.dump(2) << "\n";

    std::printf("type: %s  (p = %.3f %.3f %.3f)\n", robot_type_name(static_cast<RobotType>(pred_type)),
                static_cast<double>(out.type_prob.v[0]), static_cast<double>(out.type_prob.v[1]),
                static_cast<double>(out.type_prob.v[2]));
    std::printf("mask fg fraction: %.3f, forward %.2f ms\n", fg, 1e3 * seconds);
    std::printf("wrote %s and %s\n", mask_path.c_str(), json_path.c_str());
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckOpts {
    double tolerance = 1e-4;
    double h = 1e-5;
    int coords = 12;
    int batch = 1;
    int width = 64, height = 53;
    double w_mask = 1.0, w_jcoords = 1.5, w_bcoords = 1.5, w_type = 0.3;
    bool eq3_literal = false;
};

Minibatch<double> random_minibatch(int batch, int width, int height, std::uint64_t seed) {
    Minibatch<double> mb;
    mb.images = Tensor<double>({batch, height, width, 3});
    mb.masks = Tensor<double>({batch, height, width});
    mb.joints = Tensor<double>({batch, 18});
    mb.bases = Tensor<double>({batch, 3});
    mb.types = Tensor<double>({batch, 3});
    Rng rng(seed);
    for (auto& v : mb.images.v) v = rng.uniform();
    for (auto& v : mb.masks.v) v = rng.uniform() < 0.12 ? 1.0 - kProbEps : kProbEps;
    for (auto& v : mb.joints.v) v = rng.uniform(-0.6, 0.6);
    for (auto& v : mb.bases.v) v = rng.uniform(-0.6, 0.6);
    mb.types.zero();
    for (int b = 0; b < batch; ++b) {
        mb.types.v[static_cast<std::size_t>(b) * 3 + rng.below(3)] = 1.0;
    }
    return mb;
}

int cmd_gradcheck(const GlobalOpts& g, const GradcheckOpts& o) {
    if (g.precision != "f64") {
        std::printf("note: gradient checking always runs in f64\n");
    }
    ModelConfig mc;
    mc.width = o.width;
    mc.height = o.height;
    Model<double> model(mc);
    model.init_parameters(mix_seed(g.seed, 0x696e6974ULL));
    Minibatch<double> batch = random_minibatch(o.batch, o.width, o.height, mix_seed(g.seed, 0xda7aULL));

    LossWeights weights{o.w_mask, o.w_jcoords, o.w_bcoords, o.w_type};
    MaskLossMode mode = o.eq3_literal ? MaskLossMode::Literal : MaskLossMode::Standard;
    GradCheckReport rep = gradient_check(model, batch, weights, mode, o.h, o.coords, g.seed);

    for (const GradCheckEntry& e : rep.blocks) {
        std::printf("%-16s %3zu coords", e.block.c_str(), e.coords_checked);
        if (e.coords_skipped > 0) {
            std::printf(" (+%zu at kinks, not scored)", e.coords_skipped);
        }
        std::printf(", max rel err %.3e %s\n", e.max_rel_err,
                    e.max_rel_err < o.tolerance ? "ok" : "FAIL");
    }
    std::printf("overall max rel err %.3e over %zu coords (tolerance %.1e, %zu kink coords skipped)\n",
                rep.max_rel_err, rep.coords_checked, o.tolerance, rep.coords_skipped);
    if (!rep.passed(o.tolerance)) {
        std::fprintf(stderr, "gradient check failed\n");
        return 3;
    }
    std::printf("gradient check passed\n");
    return 0;
}

// ------------------------------------------------------------------ report

struct ReportOpts {
    std::string report_json;
    std::string train_log;
};

void cmd_report(const GlobalOpts& g, const ReportOpts& o) {
    std::string src = o.report_json.empty()
                          ? (std::filesystem::path(g.out_dir) / "report.json").string()
                          : o.report_json;
    EvalReport rep = load_report_json(src);
    TrainLog log;
    bool has_log = false;
    if (!o.train_log.empty()) {
        log = load_train_log_csv(o.train_log);
        has_log = true;
    }
    std::filesystem::create_directories(g.out_dir);
    emit_report(rep, has_log ? &log : nullptr, g.out_dir);
    std::printf("re-emitted report files in %s from %s\n", g.out_dir.c_str(), src.c_str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"rpnet: synthetic robot-arm perception pipeline"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "config file (INI); command-line flags win");

    GlobalOpts g;
    app.add_option("--seed", g.seed, "master seed")->capture_default_str();
    app.add_option("--out-dir", g.out_dir, "output directory")->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads (0 = runtime default)")
        ->capture_default_str();
    app.add_option("--precision", g.precision, "numeric precision")
        ->check(CLI::IsMember({"f32", "f64"}))
        ->capture_default_str();

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    GenDataOpts go;
    gen->add_option("--type", go.type, "robot type")
        ->check(CLI::IsMember({"ur3", "ur5", "ur10", "all"}))
        ->capture_default_str();
    gen->add_option("--count", go.count, "samples per selected type")->capture_default_str();
    gen->add_flag("--paper-analog", go.paper_analog,
                  "preset: 9 recordings with the pinned per-recording sample counts");
    gen->add_option("--width", go.width, "image width")->capture_default_str();
    gen->add_option("--height", go.height, "image height")->capture_default_str();
    gen->add_option("--fg-min", go.fg_min, "min accepted foreground fraction")->capture_default_str();
    gen->add_option("--fg-max", go.fg_max, "max accepted foreground fraction")->capture_default_str();
    gen->add_option("--calib-sigma-t", go.calib_sigma_t, "calibration noise sigma, meters")
        ->capture_default_str();
    gen->add_flag("--no-calib-noise", go.no_calib_noise, "disable calibration label noise");
    gen->add_option("--max-attempts", go.max_attempts, "rejection budget per sample")
        ->capture_default_str();

    auto* tr = app.add_subcommand("train", "train the two-branch network");
    TrainOpts to;
    tr->add_option("--dataset-dir", to.dataset_dir, "dataset directory")->required();
    tr->add_option("--split-ratio", to.split_ratio, "train fraction")->capture_default_str();
    tr->add_flag("--stratify", to.stratify, "split per robot type");
    tr->add_option("--iterations", to.iterations, "total iterations")->capture_default_str();
    tr->add_option("--batch", to.batch, "minibatch size")->capture_default_str();
    tr->add_option("--lr-start", to.lr_start, "initial learning rate")->capture_default_str();
    tr->add_option("--lr-end", to.lr_end, "final learning rate")->capture_default_str();
    tr->add_option("--optimizer", to.optimizer, "optimizer")
        ->check(CLI::IsMember({"sgd", "sgd-momentum"}))
        ->capture_default_str();
    tr->add_option("--momentum", to.momentum, "momentum coefficient")->capture_default_str();
    tr->add_option("--stop-after", to.stop_after,
                   "pause after this iteration without shortening the schedule (0 = run to end)");
    tr->add_option("--checkpoint-every", to.checkpoint_every, "checkpoint/test-eval interval")
        ->capture_default_str();
    tr->add_flag("--resume", to.resume, "continue from out-dir checkpoint");
    tr->add_option("--model-config", to.model_config, "model config file");
    tr->add_option("--w-mask", to.w_mask, "mask loss weight")->capture_default_str();
    tr->add_option("--w-jcoords", to.w_jcoords, "joint coordinate loss weight")->capture_default_str();
    tr->add_option("--w-bcoords", to.w_bcoords, "base coordinate loss weight")->capture_default_str();
    tr->add_option("--w-type", to.w_type, "type loss weight")->capture_default_str();
    tr->add_flag("--paper-eq3-literal", to.eq3_literal,
                 "use the literal printed form of the weighted mask loss");
    tr->add_option("--progress-every", to.progress_every, "progress print interval (0 = quiet)")
        ->capture_default_str();

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint and emit report files");
    EvalOpts eo;
    ev->add_option("--dataset-dir", eo.dataset_dir, "dataset directory")->required();
    ev->add_option("--split-ratio", eo.split_ratio, "train fraction used at training time")
        ->capture_default_str();
    ev->add_flag("--stratify", eo.stratify, "split per robot type");
    ev->add_option("--split", eo.split, "which part to evaluate")
        ->check(CLI::IsMember({"test", "train", "all"}))
        ->capture_default_str();
    ev->add_option("--checkpoint", eo.checkpoint, "checkpoint file")->required();
    ev->add_option("--model-config", eo.model_config, "model config file");
    ev->add_option("--threshold", eo.threshold, "mask binarization threshold")->capture_default_str();
    ev->add_flag("--per-image", eo.per_image, "average per-image mask accuracies instead of pooling");
    ev->add_option("--batch", eo.batch, "evaluation batch size")->capture_default_str();
    ev->add_option("--train-log", eo.train_log, "training CSV for loss_curve.csv");

    auto* in = app.add_subcommand("infer", "run one image through the network");
    InferOpts io;
    in->add_option("--checkpoint", io.checkpoint, "checkpoint file")->required();
    in->add_option("--model-config", io.model_config, "model config file");
    in->add_option("--image", io.image, "input PNG");
    in->add_option("--dataset-dir", io.dataset_dir, "take the input from a dataset");
    in->add_option("--index", io.index, "dataset sample index")->capture_default_str();
    in->add_option("--threshold", io.threshold, "mask binarization threshold")->capture_default_str();

    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    GradcheckOpts co;
    gc->add_option("--tolerance", co.tolerance, "max relative error")->capture_default_str();
    gc->add_option("--step", co.h, "finite-difference step")->capture_default_str();
    gc->add_option("--coords", co.coords, "coordinates checked per block")->capture_default_str();
    gc->add_option("--batch", co.batch, "batch size")->capture_default_str();
    gc->add_option("--width", co.width, "model width")->capture_default_str();
    gc->add_option("--height", co.height, "model height")->capture_default_str();
    gc->add_option("--w-mask", co.w_mask, "mask loss weight")->capture_default_str();
    gc->add_option("--w-jcoords", co.w_jcoords, "joint coordinate loss weight")->capture_default_str();
    gc->add_option("--w-bcoords", co.w_bcoords, "base coordinate loss weight")->capture_default_str();
    gc->add_option("--w-type", co.w_type, "type loss weight")->capture_default_str();
    gc->add_flag("--paper-eq3-literal", co.eq3_literal,
                 "use the literal printed form of the weighted mask loss");

    auto* rp = app.add_subcommand("report", "re-emit report files from report.json");
    ReportOpts ro;
    rp->add_option("--report-json", ro.report_json, "source report.json");
    rp->add_option("--train-log", ro.train_log, "training CSV for loss_curve.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

#ifdef _OPENMP
    if (g.threads > 0) omp_set_num_threads(g.threads);
#endif

    try {
        if (*gen) {
            cmd_gen_data(g, go);
        } else if (*tr) {
            KeyValues kv = {{"dataset_dir", to.dataset_dir},
                            {"split_ratio", num(to.split_ratio)},
                            {"stratify", to.stratify ? "true" : "false"},
                            {"iterations", std::to_string(to.iterations)},
                            {"batch", std::to_string(to.batch)},
                            {"lr", num(to.lr_start) + " -> " + num(to.lr_end)},
                            {"optimizer", to.optimizer},
                            {"momentum", num(to.momentum)},
                            {"checkpoint_every", std::to_string(to.checkpoint_every)},
                            {"stop_after", std::to_string(to.stop_after)},
                            {"resume", to.resume ? "true" : "false"},
                            {"model_config", to.model_config.empty() ? "(default)" : to.model_config},
                            {"loss_weights", num(to.w_mask) + " " + num(to.w_jcoords) + " " +
                                                 num(to.w_bcoords) + " " + num(to.w_type)},
                            {"mask_loss", to.eq3_literal ? "literal" : "standard"}};
            print_config("train", g, kv);
            if (g.precision == "f64") {
                run_train<double>(g, to);
            } else {
                run_train<float>(g, to);
            }
        } else if (*ev) {
            KeyValues kv = {{"dataset_dir", eo.dataset_dir},
                            {"split_ratio", num(eo.split_ratio)},
                            {"stratify", eo.stratify ? "true" : "false"},
                            {"split", eo.split},
                            {"checkpoint", eo.checkpoint},
                            {"threshold", num(eo.threshold)},
                            {"mask_accuracy", eo.per_image ? "per-image mean" : "pooled"},
                            {"batch", std::to_string(eo.batch)}};
            print_config("eval", g, kv);
            if (g.precision == "f64") {
                run_eval<double>(g, eo);
            } else {
                run_eval<float>(g, eo);
            }
        } else if (*in) {
            KeyValues kv = {{"checkpoint", io.checkpoint},
                            {"image", io.image.empty() ? "(dataset)" : io.image},
                            {"dataset_dir", io.dataset_dir.empty() ? "(none)" : io.dataset_dir},
                            {"index", std::to_string(io.index)},
                            {"threshold", num(io.threshold)}};
            print_config("infer", g, kv);
            if (g.precision == "f64") {
                run_infer<double>(g, io);
            } else {
                run_infer<float>(g, io);
            }
        } else if (*gc) {
            KeyValues kv = {{"tolerance", num(co.tolerance)},
                            {"h", num(co.h)},
                            {"coords_per_block", std::to_string(co.coords)},
                            {"batch", std::to_string(co.batch)},
                            {"model", std::to_string(co.width) + "x" + std::to_string(co.height)},
                            {"mask_loss", co.eq3_literal ? "literal" : "standard"}};
            print_config("gradcheck", g, kv);
            return cmd_gradcheck(g, co);
        } else if (*rp) {
            KeyValues kv = {{"report_json", ro.report_json.empty() ? "(out-dir)" : ro.report_json},
                            {"train_log", ro.train_log.empty() ? "(none)" : ro.train_log}};
            print_config("report", g, kv);
            cmd_report(g, ro);
        }
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 1;
    } catch (const std::out_of_range& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
