#include "rpnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace rpnet {

std::array<double, 3> quartiles(std::vector<double> values) {
    if (values.size() < 4) throw std::invalid_argument("quartiles: need at least 4 samples");
    std::sort(values.begin(), values.end());
    auto at = [&](double p) {
        double h = p * static_cast<double>(values.size() - 1);
        std::size_t lo = static_cast<std::size_t>(h);
        std::size_t hi = std::min(lo + 1, values.size() - 1);
        double w = h - static_cast<double>(lo);
        return values[lo] + w * (values[hi] - values[lo]);
    };
    return {at(0.25), at(0.5), at(0.75)};
}

std::array<std::array<double, 3>, 6> per_joint_breakdown(const std::vector<PerSampleEval>& samples) {
    if (samples.size() < 4)
        throw std::invalid_argument("per_joint_breakdown: need at least 4 samples");
    std::array<std::array<double, 3>, 6> out{};
    std::vector<double> col(samples.size());
    for (std::size_t j = 0; j < 6; ++j) {
        for (std::size_t i = 0; i < samples.size(); ++i) col[i] = samples[i].joint_err_cm[j];
        out[j] = quartiles(col);
    }
    return out;
}

namespace {

nlohmann::ordered_json report_to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["format"] = "rpnet-report";
    j["version"] = 1;
    auto& m = j["metrics"];
    m["mask_accuracy"] = r.mask_accuracy;
    m["type_accuracy"] = r.type_accuracy;
    m["joint_error_mean_cm"] = r.joint_error_mean_cm;
    m["base_error_mean_cm"] = r.base_error_mean_cm;
    m["joint_error_mean_per_joint_cm"] = r.joint_error_mean_per_joint_cm;
    if (r.has_quartiles) {
        auto q = nlohmann::ordered_json::array();
        for (const auto& row : r.joint_quartiles_cm)
            q.push_back({{"q1_cm", row[0]}, {"median_cm", row[1]}, {"q3_cm", row[2]}});
        m["joint_quartiles_cm"] = q;
    } else {
        m["joint_quartiles_cm"] = nullptr;
    }
    m["majority_baseline"] = r.majority_baseline;
    m["mean_fg_fraction"] = r.mean_fg_fraction;
    m["sample_count"] = r.sample_count;
    auto& ref = j["reference"];
    ref["mask_accuracy"] = EvalReport::kRefMaskAccuracy;
    ref["type_accuracy"] = EvalReport::kRefTypeAccuracy;
    ref["joint_error_mean_cm"] = EvalReport::kRefJointErrorCm;
    ref["base_error_mean_cm"] = EvalReport::kRefBaseErrorCm;
    ref["forward_ms"] = EvalReport::kRefForwardMs;
    ref["note"] = "published results of the original full-scale system, shown for context";
    auto arr = nlohmann::ordered_json::array();
    for (const auto& s : r.samples) {
        arr.push_back({{"mask_accuracy", s.mask_accuracy},
                       {"joint_err_cm", s.joint_err_cm},
                       {"base_err_cm", s.base_err_cm},
                       {"pred_type", s.pred_type},
                       {"gt_type", s.gt_type},
                       {"fg_fraction", s.fg_fraction}});
    }
    j["per_sample"] = arr;
    return j;
}

void write_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << body;
    if (!out) throw DataError("failed writing " + path);
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::string report_markdown(const EvalReport& r) {
    std::string md;
    md += "# Evaluation report\n\n";
    md += "| metric | measured | reference* |\n";
    md += "|---|---|---|\n";
    md += "| mask accuracy | " + fmt("%.4f", r.mask_accuracy) + " | " +
          fmt("%.3f", EvalReport::kRefMaskAccuracy) + " |\n";
    md += "| type accuracy | " + fmt("%.4f", r.type_accuracy) + " | " +
          fmt("%.3f", EvalReport::kRefTypeAccuracy) + " |\n";
    md += "| mean joint error (cm) | " + fmt("%.3f", r.joint_error_mean_cm) + " | " +
          fmt("%.2f", EvalReport::kRefJointErrorCm) + " |\n";
    md += "| mean base error (cm) | " + fmt("%.3f", r.base_error_mean_cm) + " | " +
          fmt("%.2f", EvalReport::kRefBaseErrorCm) + " |\n\n";
    md += "Samples: " + std::to_string(r.sample_count) + ". Mean foreground fraction: " +
          fmt("%.4f", r.mean_fg_fraction) + ".\n";
    md += "Majority-class baseline (predict all background): " + fmt("%.4f", r.majority_baseline) +
          " mask accuracy.\n\n";
    md += "\\* Reference row: results reported for the original full-scale system, trained on its "
          "full recorded corpus at full resolution (forward pass ~" +
          fmt("%.0f", EvalReport::kRefForwardMs) +
          " ms on its hardware). Listed for context only; not measured by this run.\n";
    if (r.has_quartiles) {
        md += "\n## Per-joint error (cm)\n\n";
        md += "| joint | mean | q1 | median | q3 |\n";
        md += "|---|---|---|---|---|\n";
        for (std::size_t j = 0; j < 6; ++j) {
            md += "| " + std::to_string(j + 1) + " | " +
                  fmt("%.3f", r.joint_error_mean_per_joint_cm[j]) + " | " +
                  fmt("%.3f", r.joint_quartiles_cm[j][0]) + " | " +
                  fmt("%.3f", r.joint_quartiles_cm[j][1]) + " | " +
                  fmt("%.3f", r.joint_quartiles_cm[j][2]) + " |\n";
        }
    }
    return md;
}

std::string per_joint_csv(const EvalReport& r) {
    std::string csv = "joint,mean_cm,q1_cm,median_cm,q3_cm\n";
    char buf[256];
    for (std::size_t j = 0; j < 6; ++j) {
        if (r.has_quartiles) {
            std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", j + 1,
                          r.joint_error_mean_per_joint_cm[j], r.joint_quartiles_cm[j][0],
                          r.joint_quartiles_cm[j][1], r.joint_quartiles_cm[j][2]);
        } else {
            std::snprintf(buf, sizeof(buf), "%zu,%.17g,,,\n", j + 1,
                          r.joint_error_mean_per_joint_cm[j]);
        }
        csv += buf;
    }
    return csv;
}

} // namespace

void emit_report(const EvalReport& report, const TrainLog* log, const std::string& dir) {
    write_file(dir + "/report.json", report_to_json(report).dump(2) + "\n");
    write_file(dir + "/report.md", report_markdown(report));
    write_file(dir + "/per_joint.csv", per_joint_csv(report));
    if (log != nullptr) save_train_log_csv(*log, dir + "/loss_curve.csv");
}

EvalReport load_report_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open report: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid report json in " + path + ": " + e.what());
    }
    try {
        if (j.at("format") != "rpnet-report") throw DataError("not a report file: " + path);
        EvalReport r;
        const auto& m = j.at("metrics");
        r.mask_accuracy = m.at("mask_accuracy");
        r.type_accuracy = m.at("type_accuracy");
        r.joint_error_mean_cm = m.at("joint_error_mean_cm");
        r.base_error_mean_cm = m.at("base_error_mean_cm");
        r.joint_error_mean_per_joint_cm = m.at("joint_error_mean_per_joint_cm");
        if (!m.at("joint_quartiles_cm").is_null()) {
            const auto& q = m.at("joint_quartiles_cm");
            if (q.size() != 6) throw DataError("bad quartile table in " + path);
            for (std::size_t i = 0; i < 6; ++i) {
                r.joint_quartiles_cm[i][0] = q[i].at("q1_cm");
                r.joint_quartiles_cm[i][1] = q[i].at("median_cm");
                r.joint_quartiles_cm[i][2] = q[i].at("q3_cm");
            }
            r.has_quartiles = true;
        }
        r.majority_baseline = m.at("majority_baseline");
        r.mean_fg_fraction = m.at("mean_fg_fraction");
        r.sample_count = m.at("sample_count");
        for (const auto& e : j.at("per_sample")) {
            PerSampleEval s;
            s.mask_accuracy = e.at("mask_accuracy");
            s.joint_err_cm = e.at("joint_err_cm");
            s.base_err_cm = e.at("base_err_cm");
            s.pred_type = e.at("pred_type");
            s.gt_type = e.at("gt_type");
            s.fg_fraction = e.at("fg_fraction");
            r.samples.push_back(s);
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed report " + path + ": " + e.what());
    }
}

} // namespace rpnet
