#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "rpnet/batches.hpp"
#include "rpnet/errors.hpp"
#include "rpnet/model.hpp"
#include "rpnet/trainer.hpp"

namespace rpnet {

struct EvalOptions {
    double threshold = 0.5;            // mask binarization
    bool per_image_mask_accuracy = false; // default pools pixels across the set
    int batch_size = 64;
};

struct PerSampleEval {
    double mask_accuracy = 0.0;
    std::array<double, 6> joint_err_cm{};
    double base_err_cm = 0.0;
    int pred_type = 0;
    int gt_type = 0;
    double fg_fraction = 0.0;
};

// Table-style summary carrying the published reference results for
// side-by-side display; those constants are context, not targets.
struct EvalReport {
    double mask_accuracy = 0.0;
    double type_accuracy = 0.0;
    double joint_error_mean_cm = 0.0;
    double base_error_mean_cm = 0.0;
    std::array<double, 6> joint_error_mean_per_joint_cm{};
    std::array<std::array<double, 3>, 6> joint_quartiles_cm{}; // q1, median, q3
    bool has_quartiles = false;
    double majority_baseline = 0.0; // all-background predictor accuracy
    double mean_fg_fraction = 0.0;
    std::size_t sample_count = 0;
    std::vector<PerSampleEval> samples;

    static constexpr double kRefMaskAccuracy = 0.98;
    static constexpr double kRefTypeAccuracy = 0.983;
    static constexpr double kRefJointErrorCm = 3.16;
    static constexpr double kRefBaseErrorCm = 2.74;
    static constexpr double kRefForwardMs = 15.0;
};

// fraction of pixels whose thresholded prediction matches the ground truth
template <typename T>
double mask_accuracy(const Tensor<T>& pred, const Tensor<T>& gt, double threshold = 0.5) {
    if (!pred.same_shape(gt)) throw std::invalid_argument("mask_accuracy: shape mismatch");
    if (pred.size() == 0) throw std::invalid_argument("mask_accuracy: empty mask");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        bool p = static_cast<double>(pred.v[i]) > threshold;
        bool g = static_cast<double>(gt.v[i]) > 0.5;
        correct += p == g ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

template <typename T>
std::array<double, 6> joint_errors_cm(const T* pred18, const T* gt18) {
    std::array<double, 6> out{};
    for (int j = 0; j < 6; ++j) {
        double dx = static_cast<double>(pred18[j * 3 + 0]) - static_cast<double>(gt18[j * 3 + 0]);
        double dy = static_cast<double>(pred18[j * 3 + 1]) - static_cast<double>(gt18[j * 3 + 1]);
        double dz = static_cast<double>(pred18[j * 3 + 2]) - static_cast<double>(gt18[j * 3 + 2]);
        out[static_cast<std::size_t>(j)] = 100.0 * std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    return out;
}

template <typename T>
double base_error_cm(const T* pred3, const T* gt3) {
    double dx = static_cast<double>(pred3[0]) - static_cast<double>(gt3[0]);
    double dy = static_cast<double>(pred3[1]) - static_cast<double>(gt3[1]);
    double dz = static_cast<double>(pred3[2]) - static_cast<double>(gt3[2]);
    return 100.0 * std::sqrt(dx * dx + dy * dy + dz * dz);
}

// ties broken toward the lowest class index
template <typename T>
int argmax_class(const T* row, int n) {
    int best = 0;
    for (int i = 1; i < n; ++i) {
        if (row[i] > row[best]) best = i;
    }
    return best;
}

// q1/median/q3 with linear interpolation between order statistics
std::array<double, 3> quartiles(std::vector<double> values);

// per-joint quartile rows from per-sample results; needs >= 4 samples
std::array<std::array<double, 3>, 6> per_joint_breakdown(const std::vector<PerSampleEval>& samples);

template <typename T>
EvalReport evaluate(const Model<T>& model, const TensorDataset<T>& data,
                    const EvalOptions& options = {}) {
    if (data.count == 0) throw DataError("cannot evaluate an empty dataset");
    EvalReport rep;
    rep.sample_count = data.count;
    rep.samples.reserve(data.count);

    std::size_t total_px = 0, correct_px = 0, correct_types = 0;
    double joint_sum = 0.0, base_sum = 0.0, acc_sum = 0.0, fg_sum = 0.0;
    std::array<double, 6> per_joint_sum{};

    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < data.count;
         start += static_cast<std::size_t>(options.batch_size)) {
        std::size_t end = std::min(data.count, start + static_cast<std::size_t>(options.batch_size));
        idx.clear();
        for (std::size_t i = start; i < end; ++i) idx.push_back(i);
        Minibatch<T> batch = data.gather(idx);
        auto out = model.forward(to_nchw(batch.images));

        std::size_t px = data.pixels();
        int b = batch.batch();
        for (int i = 0; i < b; ++i) {
            PerSampleEval s;
            std::size_t correct = 0, fg = 0;
            const T* pm = out.mask_prob.data() + static_cast<std::size_t>(i) * px;
            const T* gm = batch.masks.data() + static_cast<std::size_t>(i) * px;
            for (std::size_t k = 0; k < px; ++k) {
                bool p = static_cast<double>(pm[k]) > options.threshold;
                bool g = static_cast<double>(gm[k]) > 0.5;
                correct += p == g ? 1 : 0;
                fg += g ? 1 : 0;
            }
            s.mask_accuracy = static_cast<double>(correct) / static_cast<double>(px);
            s.fg_fraction = static_cast<double>(fg) / static_cast<double>(px);
            s.joint_err_cm = joint_errors_cm(out.joints.data() + static_cast<std::size_t>(i) * 18,
                                             batch.joints.data() + static_cast<std::size_t>(i) * 18);
            s.base_err_cm = base_error_cm(out.base.data() + static_cast<std::size_t>(i) * 3,
                                          batch.bases.data() + static_cast<std::size_t>(i) * 3);
            s.pred_type = argmax_class(out.type_prob.data() + static_cast<std::size_t>(i) * 3, 3);
            s.gt_type = argmax_class(batch.types.data() + static_cast<std::size_t>(i) * 3, 3);

            total_px += px;
            correct_px += correct;
            acc_sum += s.mask_accuracy;
            fg_sum += s.fg_fraction;
            correct_types += s.pred_type == s.gt_type ? 1 : 0;
            for (int j = 0; j < 6; ++j) {
                per_joint_sum[static_cast<std::size_t>(j)] += s.joint_err_cm[static_cast<std::size_t>(j)];
                joint_sum += s.joint_err_cm[static_cast<std::size_t>(j)];
            }
            base_sum += s.base_err_cm;
            rep.samples.push_back(s);
        }
    }

    double n = static_cast<double>(data.count);
    rep.mask_accuracy = options.per_image_mask_accuracy
                            ? acc_sum / n
                            : static_cast<double>(correct_px) / static_cast<double>(total_px);
    rep.type_accuracy = static_cast<double>(correct_types) / n;
    rep.joint_error_mean_cm = joint_sum / (6.0 * n);
    rep.base_error_mean_cm = base_sum / n;
    for (int j = 0; j < 6; ++j) {
        rep.joint_error_mean_per_joint_cm[static_cast<std::size_t>(j)] =
            per_joint_sum[static_cast<std::size_t>(j)] / n;
    }
    rep.mean_fg_fraction = fg_sum / n;
    rep.majority_baseline = 1.0 - rep.mean_fg_fraction;
    if (data.count >= 4) {
        rep.joint_quartiles_cm = per_joint_breakdown(rep.samples);
        rep.has_quartiles = true;
    }
    return rep;
}

// report.json + report.md (measured vs reference rows) + per_joint.csv, and
// loss_curve.csv when a train log is supplied
void emit_report(const EvalReport& report, const TrainLog* log, const std::string& dir);
EvalReport load_report_json(const std::string& path);

} // namespace rpnet
