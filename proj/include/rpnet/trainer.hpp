#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rpnet/batches.hpp"
#include "rpnet/checkpoint.hpp"
#include "rpnet/errors.hpp"
#include "rpnet/losses.hpp"
#include "rpnet/model.hpp"

namespace rpnet {

enum class OptimizerKind { Sgd, SgdMomentum };

struct TrainConfig {
    int batch_size = 64;
    double lr_start = 0.001;
    double lr_end = 0.000001;
    int total_iterations = 2000;
    std::uint64_t seed = 1;
    OptimizerKind optimizer = OptimizerKind::SgdMomentum;
    double momentum = 0.9;
    int checkpoint_every = 200;
    int stop_after = 0; // 0 = run to total_iterations; else pause there (schedule unchanged)
    LossWeights loss_weights;
    MaskLossMode mask_mode = MaskLossMode::Standard;
    std::optional<ClassWeights> fixed_class_weights; // dataset-level option
    std::string out_dir;                             // empty disables checkpoints + CSV

    void validate() const {
        if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
        if (!(lr_start >= lr_end && lr_end > 0.0)) {
            throw std::invalid_argument("need lr_start >= lr_end > 0");
        }
        if (total_iterations < 1) throw std::invalid_argument("total_iterations must be >= 1");
        if (checkpoint_every < 1) throw std::invalid_argument("checkpoint_every must be >= 1");
        if (stop_after < 0 || stop_after > total_iterations) {
            throw std::invalid_argument("stop_after must be in [0, total_iterations]");
        }
        if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("momentum must be in [0,1)");
        loss_weights.validate();
    }
};

// exponential interpolation from lr_start to lr_end, exact at both endpoints
inline double lr_at(int iteration, const TrainConfig& cfg) {
    int last = cfg.total_iterations - 1;
    if (iteration < 0 || iteration > last) {
        throw std::out_of_range("lr_at: iteration " + std::to_string(iteration) +
                                " outside [0, " + std::to_string(last) + "]");
    }
    if (iteration == 0 || cfg.lr_start == cfg.lr_end) return cfg.lr_start;
    if (iteration == last) return cfg.lr_end;
    double t = static_cast<double>(iteration) / static_cast<double>(last);
    return cfg.lr_start * std::pow(cfg.lr_end / cfg.lr_start, t);
}

struct TrainRecord {
    int iteration = 0;
    double lr = 0.0;
    LossBreakdown train;
    bool has_train = true;
    double test_l_final = 0.0;
    bool has_test = false;
};

struct TrainLog {
    std::vector<TrainRecord> records;
};

inline void save_train_log_csv(const TrainLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write train log: " + path);
    out << "iteration,lr,l_final,l_mask,l_jcoords,l_bcoords,l_type,test_l_final\n";
    char buf[512];
    for (const TrainRecord& r : log.records) {
        if (r.has_train) {
            std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", r.iteration,
                          r.lr, r.train.l_final, r.train.l_mask, r.train.l_jcoords,
                          r.train.l_bcoords, r.train.l_type);
        } else {
            std::snprintf(buf, sizeof(buf), "%d,,,,,,", r.iteration);
        }
        out << buf;
        if (r.has_test) {
            std::snprintf(buf, sizeof(buf), ",%.17g", r.test_l_final);
            out << buf;
        } else {
            out << ",";
        }
        out << "\n";
    }
    if (!out) throw DataError("failed writing train log: " + path);
}

inline TrainLog load_train_log_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open train log: " + path);
    std::string line;
    if (!std::getline(in, line) ||
        line != "iteration,lr,l_final,l_mask,l_jcoords,l_bcoords,l_type,test_l_final") {
        throw DataError("unrecognized train log header in " + path);
    }
    TrainLog log;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::size_t pos = 0;
        while (true) {
            std::size_t comma = line.find(',', pos);
            cols.push_back(line.substr(pos, comma == std::string::npos ? comma : comma - pos));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (cols.size() != 8) throw DataError("malformed train log row in " + path + ": " + line);
        try {
            TrainRecord r;
            r.iteration = std::stoi(cols[0]);
            r.has_train = !cols[1].empty();
            if (r.has_train) {
                r.lr = std::stod(cols[1]);
                r.train.l_final = std::stod(cols[2]);
                r.train.l_mask = std::stod(cols[3]);
                r.train.l_jcoords = std::stod(cols[4]);
                r.train.l_bcoords = std::stod(cols[5]);
                r.train.l_type = std::stod(cols[6]);
            }
            r.has_test = !cols[7].empty();
            if (r.has_test) r.test_l_final = std::stod(cols[7]);
            log.records.push_back(r);
        } catch (const std::exception&) {
            throw DataError("malformed train log row in " + path + ": " + line);
        }
    }
    return log;
}

template <typename T>
struct OptimizerState {
    std::vector<Tensor<T>> velocity; // aligned with model blocks

    template <typename ModelT>
    void reset(const ModelT& model) {
        velocity.clear();
        velocity.reserve(static_cast<std::size_t>(model.num_blocks()));
        for (int i = 0; i < model.num_blocks(); ++i) {
            velocity.emplace_back(model.block(i).shape);
        }
    }
};

// One SGD(+momentum) step over a minibatch; returns the pre-update loss.
template <typename T>
LossBreakdown train_step(Model<T>& model, const Minibatch<T>& batch, double lr,
                         OptimizerState<T>& state, const TrainConfig& cfg) {
    if (state.velocity.size() != static_cast<std::size_t>(model.num_blocks())) state.reset(model);

    Tensor<T> images = to_nchw(batch.images);
    typename Model<T>::Trace trace;
    auto out = model.forward(images, &trace);
    auto loss = combined_loss(out.mask_prob, out.joints, out.base, out.type_prob, batch,
                              cfg.loss_weights, cfg.mask_mode, cfg.fixed_class_weights);
    if (!std::isfinite(loss.breakdown.l_final)) {
        throw NumericError("non-finite combined loss");
    }
    typename Model<T>::OutputGrads og;
    og.mask_prob = std::move(loss.grad_mask);
    og.joints = std::move(loss.grad_joints);
    og.base = std::move(loss.grad_base);
    og.type_prob = std::move(loss.grad_type);
    std::vector<Tensor<T>> grads = model.backward(trace, og);

    for (int i = 0; i < model.num_blocks(); ++i) {
        const Tensor<T>& g = grads[static_cast<std::size_t>(i)];
        if (!g.finite()) {
            throw NumericError("non-finite gradient in block " + model.block_name(i));
        }
        Tensor<T>& theta = model.block(i);
        Tensor<T>& vel = state.velocity[static_cast<std::size_t>(i)];
        T lrt = static_cast<T>(lr);
        if (cfg.optimizer == OptimizerKind::SgdMomentum) {
            T mu = static_cast<T>(cfg.momentum);
            for (std::size_t k = 0; k < theta.size(); ++k) {
                vel.v[k] = mu * vel.v[k] + g.v[k];
                theta.v[k] -= lrt * vel.v[k];
            }
        } else {
            for (std::size_t k = 0; k < theta.size(); ++k) {
                theta.v[k] -= lrt * g.v[k];
            }
        }
    }
    return loss.breakdown;
}

// mean combined loss over a dataset, evaluated in fixed batch order
template <typename T>
double dataset_l_final(const Model<T>& model, const TensorDataset<T>& data,
                       const TrainConfig& cfg) {
    if (data.count == 0) throw DataError("cannot evaluate loss on an empty dataset");
    double total = 0.0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < data.count;
         start += static_cast<std::size_t>(cfg.batch_size)) {
        std::size_t end = std::min(data.count, start + static_cast<std::size_t>(cfg.batch_size));
        idx.clear();
        for (std::size_t i = start; i < end; ++i) idx.push_back(i);
        Minibatch<T> batch = data.gather(idx);
        auto out = model.forward(to_nchw(batch.images));
        auto loss = combined_loss(out.mask_prob, out.joints, out.base, out.type_prob, batch,
                                  cfg.loss_weights, cfg.mask_mode, cfg.fixed_class_weights);
        total += loss.breakdown.l_final * static_cast<double>(end - start);
    }
    return total / static_cast<double>(data.count);
}

template <typename T>
void save_training_checkpoint(const Model<T>& model, const OptimizerState<T>& state,
                              int next_iteration, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::vector<CheckpointBlock> blocks = model.to_checkpoint();
    for (std::size_t i = 0; i < state.velocity.size(); ++i) {
        blocks.push_back(to_block("opt.v." + model.block_name(static_cast<int>(i)),
                                  state.velocity[i]));
    }
    save_checkpoint((std::filesystem::path(dir) / "checkpoint.rpnn").string(), blocks);
    std::ofstream out(std::filesystem::path(dir) / "resume.txt");
    out << "iteration = " << next_iteration << "\n";
    if (!out) throw DataError("failed writing resume state in " + dir);
}

// loads params + optimizer state; returns the next iteration to run
template <typename T>
int load_training_checkpoint(Model<T>& model, OptimizerState<T>& state, const std::string& dir) {
    auto blocks = load_checkpoint((std::filesystem::path(dir) / "checkpoint.rpnn").string());
    model.load_from_checkpoint(blocks);
    state.reset(model);
    for (const CheckpointBlock& b : blocks) {
        if (b.name.rfind("opt.v.", 0) != 0) continue;
        int idx = model.block_index(b.name.substr(6));
        if (idx < 0) throw DataError("optimizer state block '" + b.name + "' matches no parameter");
        state.velocity[static_cast<std::size_t>(idx)] = from_block<T>(b);
    }

    std::ifstream in(std::filesystem::path(dir) / "resume.txt");
    if (!in) throw DataError("missing resume state in " + dir);
    std::string key, eq;
    int iteration = -1;
    in >> key >> eq >> iteration;
    if (key != "iteration" || eq != "=" || iteration < 0) {
        throw DataError("malformed resume state in " + dir);
    }
    return iteration;
}

// Runs iterations [start_iteration, stop), where stop is stop_after if set,
// else total_iterations; evaluates the test loss every checkpoint_every
// iterations (pre-step) and once after the last step. The learning-rate
// schedule and batch order always follow total_iterations, so a run paused
// by stop_after and then resumed is bit-identical to an uninterrupted one.
template <typename T>
TrainLog train(Model<T>& model, const TensorDataset<T>& train_set,
               const TensorDataset<T>& test_set, const TrainConfig& cfg, int start_iteration = 0,
               OptimizerState<T>* state_io = nullptr,
               const std::function<void(const TrainRecord&)>& on_record = {}) {
    cfg.validate();
    if (train_set.count == 0 || test_set.count == 0) {
        throw DataError("training needs non-empty train and test sets");
    }
    const int stop = cfg.stop_after > 0 ? cfg.stop_after : cfg.total_iterations;
    if (start_iteration < 0 || start_iteration > stop) {
        throw std::invalid_argument("start iteration outside the configured run");
    }

    OptimizerState<T> local;
    OptimizerState<T>& state = state_io ? *state_io : local;
    if (state.velocity.size() != static_cast<std::size_t>(model.num_blocks())) state.reset(model);

    std::size_t n = train_set.count;
    std::uint64_t bpe = (n + static_cast<std::size_t>(cfg.batch_size) - 1) /
                        static_cast<std::size_t>(cfg.batch_size);
    std::uint64_t cached_epoch = ~0ULL;
    std::vector<std::vector<std::size_t>> batches;

    TrainLog log;
    for (int t = start_iteration; t < stop; ++t) {
        std::uint64_t epoch = static_cast<std::uint64_t>(t) / bpe;
        if (epoch != cached_epoch) {
            batches = epoch_batches(n, cfg.batch_size, cfg.seed, epoch);
            cached_epoch = epoch;
        }
        const auto& idx = batches[static_cast<std::size_t>(t) % bpe];

        TrainRecord rec;
        rec.iteration = t;
        rec.lr = lr_at(t, cfg);
        if (t % cfg.checkpoint_every == 0) {
            rec.test_l_final = dataset_l_final(model, test_set, cfg);
            rec.has_test = true;
        }
        Minibatch<T> batch = train_set.gather(idx);
        try {
            rec.train = train_step(model, batch, rec.lr, state, cfg);
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " at iteration " + std::to_string(t));
        }
        log.records.push_back(rec);
        if (on_record) on_record(rec);

        bool last = t + 1 == stop;
        if (!cfg.out_dir.empty() && ((t + 1) % cfg.checkpoint_every == 0 || last)) {
            save_training_checkpoint(model, state, t + 1, cfg.out_dir);
        }
    }

    TrainRecord final_rec;
    final_rec.iteration = stop;
    final_rec.has_train = false;
    final_rec.test_l_final = dataset_l_final(model, test_set, cfg);
    final_rec.has_test = true;
    log.records.push_back(final_rec);
    if (on_record) on_record(final_rec);

    if (!cfg.out_dir.empty()) {
        save_train_log_csv(log, (std::filesystem::path(cfg.out_dir) / "train_log.csv").string());
    }
    return log;
}

} // namespace rpnet
