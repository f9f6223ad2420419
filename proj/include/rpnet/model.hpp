#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rpnet/checkpoint.hpp"
#include "rpnet/kernels.hpp"
#include "rpnet/rng.hpp"
#include "rpnet/tensor.hpp"

namespace rpnet {

struct ConvSpec {
    int channels = 16;
    int kernel = 3;
    int dilation = 1;
};

// Two-branch multi-objective network: shared conv trunk, dilated-conv mask
// branch with a full-resolution sigmoid head, pooled regression branch, and a
// skip path tapped from the 4th mask conv whose fully connected layer is
// summed with the regression branch before the joint/base/type heads.
struct ModelConfig {
    int width = 64;
    int height = 53;
    std::vector<int> trunk_channels{8, 16};                           // 3x3 convs, dilation 1
    std::vector<ConvSpec> mask_branch{{16, 3, 1}, {16, 3, 2}, {16, 3, 4}, {16, 3, 8}};
    ConvSpec reg_conv1{16, 3, 2};
    ConvSpec reg_conv2{32, 3, 1};
    int reg_pool = 2;   // maxpool before each regression conv
    int branch_fc = 128; // width of both summed fully connected layers
    int skip_pool = 4;  // maxpool applied to the tapped mask activation
    int fuse_fc = 64;

    static constexpr int kSkipTap = 4;    // 1-based mask conv feeding the skip path
    static constexpr int kJointsOut = 18; // 6 joints x 3 coords
    static constexpr int kBaseOut = 3;
    static constexpr int kTypeOut = 3;

    void validate() const;
    // spatial dims after pooling stages (computed, validated > 0);
    // 0 when the window no longer fits
    static int pooled_dim(int in, int k) { return in < k ? 0 : (in - k) / k + 1; }
    int pool1_h() const { return pooled_dim(height, reg_pool); }
    int pool1_w() const { return pooled_dim(width, reg_pool); }
    int pool2_h() const { return pooled_dim(pool1_h(), reg_pool); }
    int pool2_w() const { return pooled_dim(pool1_w(), reg_pool); }
    int skip_h() const { return pooled_dim(height, skip_pool); }
    int skip_w() const { return pooled_dim(width, skip_pool); }
};

ModelConfig load_model_config(const std::string& path);
void save_model_config(const ModelConfig& config, const std::string& path);

inline void ModelConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("model config: " + what); };
    if (width < 8 || height < 8) fail("input resolution must be at least 8x8");
    if (trunk_channels.empty()) fail("trunk needs at least one conv layer");
    for (int c : trunk_channels) {
        if (c < 1) fail("trunk channel counts must be positive");
    }
    if (static_cast<int>(mask_branch.size()) < kSkipTap) {
        fail("mask branch needs at least 4 conv layers so the skip tap at conv 4 exists");
    }
    auto check_conv = [&](const ConvSpec& s, const std::string& name) {
        if (s.channels < 1) fail(name + ": channels must be positive");
        if (s.kernel < 1 || s.kernel % 2 == 0) fail(name + ": kernel must be odd");
        if (s.dilation < 1) fail(name + ": dilation must be >= 1");
        int span = s.dilation * (s.kernel - 1) + 1;
        if (span > width || span > height) fail(name + ": dilated kernel span exceeds the input");
    };
    for (std::size_t i = 0; i < mask_branch.size(); ++i) {
        check_conv(mask_branch[i], "mask conv " + std::to_string(i + 1));
    }
    check_conv(reg_conv1, "regression conv 1");
    check_conv(reg_conv2, "regression conv 2");
    if (reg_pool < 1 || skip_pool < 1) fail("pool sizes must be >= 1");
    if (branch_fc < 1 || fuse_fc < 1) fail("fully connected widths must be positive");
    if (pool1_h() < 1 || pool1_w() < 1 || pool2_h() < 1 || pool2_w() < 1) {
        fail("regression branch pooling collapses the image; increase resolution");
    }
    if (skip_h() < 1 || skip_w() < 1) fail("skip pooling collapses the image; increase resolution");
    auto same_pad_ok = [](const ConvSpec& s, int h, int w) {
        int pad = s.dilation * (s.kernel - 1) / 2;
        int span = s.dilation * (s.kernel - 1) + 1;
        return h + 2 * pad >= span && w + 2 * pad >= span;
    };
    if (!same_pad_ok(reg_conv1, pool1_h(), pool1_w())) {
        fail("regression conv 1 span exceeds the pooled image");
    }
    if (!same_pad_ok(reg_conv2, pool2_h(), pool2_w())) {
        fail("regression conv 2 span exceeds the pooled image");
    }
}

template <typename T>
class Model {
public:
    explicit Model(ModelConfig config) : cfg_(std::move(config)) {
        cfg_.validate();
        build_blocks();
    }

    const ModelConfig& config() const { return cfg_; }

    int num_blocks() const { return static_cast<int>(blocks_.size()); }
    const std::string& block_name(int i) const { return names_[static_cast<std::size_t>(i)]; }
    Tensor<T>& block(int i) { return blocks_[static_cast<std::size_t>(i)]; }
    const Tensor<T>& block(int i) const { return blocks_[static_cast<std::size_t>(i)]; }
    int block_index(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? -1 : it->second;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const Tensor<T>& b : blocks_) n += b.size();
        return n;
    }

    // fan-scaled uniform init (bound = sqrt(6/(fan_in+fan_out))), zero biases
    void init_parameters(std::uint64_t seed) {
        Rng rng(seed);
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            Tensor<T>& t = blocks_[i];
            if (names_[i].size() > 2 && names_[i].compare(names_[i].size() - 2, 2, ".b") == 0) {
                t.zero();
                continue;
            }
            double fan_in, fan_out;
            if (t.ndims() == 4) {
                fan_in = static_cast<double>(t.shape[1]) * t.shape[2] * t.shape[3];
                fan_out = static_cast<double>(t.shape[0]) * t.shape[2] * t.shape[3];
            } else {
                fan_in = t.shape[1];
                fan_out = t.shape[0];
            }
            double bound = std::sqrt(6.0 / (fan_in + fan_out));
            for (std::size_t k = 0; k < t.size(); ++k) {
                t.v[k] = static_cast<T>(rng.uniform(-bound, bound));
            }
        }
    }

    struct Output {
        Tensor<T> mask_prob; // BxHxW in (0,1)
        Tensor<T> joints;    // Bx18 meters, camera frame
        Tensor<T> base;      // Bx3 meters, camera frame
        Tensor<T> type_prob; // Bx3, rows sum to 1
    };

    struct Trace {
        Tensor<T> input;
        std::vector<Tensor<T>> trunk_act;
        std::vector<Tensor<T>> mask_act;
        Tensor<T> mask_prob; // Bx1xHxW
        MaxPoolResult<T> pool1;
        Tensor<T> reg_act1;
        MaxPoolResult<T> pool2;
        Tensor<T> reg_act2;
        MaxPoolResult<T> spool;
        Tensor<T> fc_reg;
        Tensor<T> fc_skip;
        Tensor<T> sum_act;
        Tensor<T> fuse_act;
        Tensor<T> type_prob;
    };

    struct OutputGrads {
        Tensor<T> mask_prob; // BxHxW
        Tensor<T> joints;    // Bx18
        Tensor<T> base;      // Bx3
        Tensor<T> type_prob; // Bx3
    };

    Output forward(const Tensor<T>& images, Trace* trace = nullptr) const {
        if (images.ndims() != 4 || images.shape[1] != 3 || images.shape[2] != cfg_.height ||
            images.shape[3] != cfg_.width) {
            throw std::invalid_argument("forward: expected Bx3x" + std::to_string(cfg_.height) +
                                        "x" + std::to_string(cfg_.width) + " images, got " +
                                        images.shape_str());
        }
        int b = images.shape[0];
        Trace scratch;
        Trace& t = trace ? *trace : scratch;

        t.input = images;
        t.trunk_act.clear();
        const Tensor<T>* cur = &t.input;
        for (std::size_t i = 0; i < cfg_.trunk_channels.size(); ++i) {
            Tensor<T> z = conv2d_forward(*cur, cblock("trunk.conv" + std::to_string(i + 1) + ".w"),
                                         cblock("trunk.conv" + std::to_string(i + 1) + ".b"), 1, 1, 1);
            t.trunk_act.push_back(relu_forward(z));
            cur = &t.trunk_act.back();
        }
        const Tensor<T>& trunk_out = t.trunk_act.back();

        t.mask_act.clear();
        cur = &trunk_out;
        for (std::size_t i = 0; i < cfg_.mask_branch.size(); ++i) {
            const ConvSpec& s = cfg_.mask_branch[i];
            int pad = s.dilation * (s.kernel - 1) / 2;
            Tensor<T> z = conv2d_forward(*cur, cblock("mask.conv" + std::to_string(i + 1) + ".w"),
                                         cblock("mask.conv" + std::to_string(i + 1) + ".b"), 1, pad,
                                         s.dilation);
            t.mask_act.push_back(relu_forward(z));
            cur = &t.mask_act.back();
        }
        Tensor<T> mask_logits =
            conv2d_forward(t.mask_act.back(), cblock("mask.out.w"), cblock("mask.out.b"), 1, 0, 1);
        t.mask_prob = sigmoid_forward(mask_logits);

        t.pool1 = maxpool_forward(trunk_out, cfg_.reg_pool, cfg_.reg_pool);
        {
            int pad = reg_pad1();
            Tensor<T> z = conv2d_forward(t.pool1.output, cblock("reg.conv1.w"),
                                         cblock("reg.conv1.b"), 1, pad, cfg_.reg_conv1.dilation);
            t.reg_act1 = relu_forward(z);
        }
        t.pool2 = maxpool_forward(t.reg_act1, cfg_.reg_pool, cfg_.reg_pool);
        {
            int pad = reg_pad2();
            Tensor<T> z = conv2d_forward(t.pool2.output, cblock("reg.conv2.w"),
                                         cblock("reg.conv2.b"), 1, pad, cfg_.reg_conv2.dilation);
            t.reg_act2 = relu_forward(z);
        }
        Tensor<T> reg_flat = reshape(t.reg_act2, {b, reg_flat_n_});
        t.fc_reg = dense_forward(reg_flat, cblock("reg.fc.w"), cblock("reg.fc.b"));

        t.spool = maxpool_forward(t.mask_act[ModelConfig::kSkipTap - 1], cfg_.skip_pool,
                                  cfg_.skip_pool);
        Tensor<T> skip_flat = reshape(t.spool.output, {b, skip_flat_n_});
        t.fc_skip = dense_forward(skip_flat, cblock("skip.fc.w"), cblock("skip.fc.b"));

        t.sum_act = relu_forward(elementwise_add(t.fc_reg, t.fc_skip));
        t.fuse_act =
            relu_forward(dense_forward(t.sum_act, cblock("fuse.fc.w"), cblock("fuse.fc.b")));

        Output out;
        out.joints = dense_forward(t.fuse_act, cblock("head.joints.w"), cblock("head.joints.b"));
        out.base = dense_forward(t.fuse_act, cblock("head.base.w"), cblock("head.base.b"));
        Tensor<T> type_logits =
            dense_forward(t.fuse_act, cblock("head.type.w"), cblock("head.type.b"));
        t.type_prob = softmax_forward(type_logits);
        out.type_prob = t.type_prob;
        out.mask_prob = reshape(t.mask_prob, {b, cfg_.height, cfg_.width});
        return out;
    }

    std::pair<Output, double> forward_timed(const Tensor<T>& images) const {
        auto t0 = std::chrono::steady_clock::now();
        Output out = forward(images);
        auto t1 = std::chrono::steady_clock::now();
        return {std::move(out), std::chrono::duration<double>(t1 - t0).count()};
    }

    // gradients aligned with block indices
    std::vector<Tensor<T>> backward(const Trace& t, const OutputGrads& og) const {
        int b = t.input.shape[0];
        std::vector<Tensor<T>> g(blocks_.size());

        // heads
        Tensor<T> g_type_logits = softmax_backward(t.type_prob, og.type_prob);
        DenseGrads<T> dj = dense_backward(t.fuse_act, cblock("head.joints.w"), og.joints);
        DenseGrads<T> db = dense_backward(t.fuse_act, cblock("head.base.w"), og.base);
        DenseGrads<T> dt = dense_backward(t.fuse_act, cblock("head.type.w"), g_type_logits);
        assign(g, "head.joints", dj);
        assign(g, "head.base", db);
        assign(g, "head.type", dt);

        Tensor<T> g_fuse_act = elementwise_add(elementwise_add(dj.input, db.input), dt.input);
        Tensor<T> g_fuse_pre = relu_backward(t.fuse_act, g_fuse_act);
        DenseGrads<T> df = dense_backward(t.sum_act, cblock("fuse.fc.w"), g_fuse_pre);
        assign(g, "fuse.fc", df);
        Tensor<T> g_sum = relu_backward(t.sum_act, df.input);

        // regression branch
        Tensor<T> reg_flat = reshape(t.reg_act2, {b, reg_flat_n_});
        DenseGrads<T> dreg = dense_backward(reg_flat, cblock("reg.fc.w"), g_sum);
        assign(g, "reg.fc", dreg);
        Tensor<T> g_act2 = reshape(dreg.input, t.reg_act2.shape);
        Tensor<T> g_z2 = relu_backward(t.reg_act2, g_act2);
        Conv2dGrads<T> c2 = conv2d_backward(t.pool2.output, cblock("reg.conv2.w"), g_z2, 1,
                                            reg_pad2(), cfg_.reg_conv2.dilation);
        assign(g, "reg.conv2", c2);
        Tensor<T> g_act1 = maxpool_backward(c2.input, t.pool2.argmax, t.reg_act1.shape);
        Tensor<T> g_z1 = relu_backward(t.reg_act1, g_act1);
        Conv2dGrads<T> c1 = conv2d_backward(t.pool1.output, cblock("reg.conv1.w"), g_z1, 1,
                                            reg_pad1(), cfg_.reg_conv1.dilation);
        assign(g, "reg.conv1", c1);
        Tensor<T> g_trunk_reg =
            maxpool_backward(c1.input, t.pool1.argmax, t.trunk_act.back().shape);

        // skip path
        DenseGrads<T> dskip =
            dense_backward(reshape(t.spool.output, {b, skip_flat_n_}), cblock("skip.fc.w"), g_sum);
        assign(g, "skip.fc", dskip);
        Tensor<T> g_spool = reshape(dskip.input, t.spool.output.shape);
        Tensor<T> g_mask_skip = maxpool_backward(g_spool, t.spool.argmax,
                                                 t.mask_act[ModelConfig::kSkipTap - 1].shape);

        // mask head
        Tensor<T> g_prob = reshape(og.mask_prob, t.mask_prob.shape);
        Tensor<T> g_mask_logits = sigmoid_backward(t.mask_prob, g_prob);
        Conv2dGrads<T> cm =
            conv2d_backward(t.mask_act.back(), cblock("mask.out.w"), g_mask_logits, 1, 0, 1);
        assign(g, "mask.out", cm);

        // walk the mask branch back, merging the skip gradient at the tap
        Tensor<T> g_cur = std::move(cm.input);
        for (int i = static_cast<int>(cfg_.mask_branch.size()) - 1; i >= 0; --i) {
            if (i == ModelConfig::kSkipTap - 1) g_cur = elementwise_add(g_cur, g_mask_skip);
            Tensor<T> gz = relu_backward(t.mask_act[static_cast<std::size_t>(i)], g_cur);
            const ConvSpec& s = cfg_.mask_branch[static_cast<std::size_t>(i)];
            const Tensor<T>& in =
                i == 0 ? t.trunk_act.back() : t.mask_act[static_cast<std::size_t>(i - 1)];
            Conv2dGrads<T> c = conv2d_backward(in, cblock("mask.conv" + std::to_string(i + 1) + ".w"),
                                               gz, 1, s.dilation * (s.kernel - 1) / 2, s.dilation);
            assign(g, "mask.conv" + std::to_string(i + 1), c);
            g_cur = std::move(c.input);
        }

        // trunk
        Tensor<T> g_trunk = elementwise_add(g_cur, g_trunk_reg);
        for (int i = static_cast<int>(cfg_.trunk_channels.size()) - 1; i >= 0; --i) {
            Tensor<T> gz = relu_backward(t.trunk_act[static_cast<std::size_t>(i)], g_trunk);
            const Tensor<T>& in = i == 0 ? t.input : t.trunk_act[static_cast<std::size_t>(i - 1)];
            Conv2dGrads<T> c = conv2d_backward(
                in, cblock("trunk.conv" + std::to_string(i + 1) + ".w"), gz, 1, 1, 1);
            assign(g, "trunk.conv" + std::to_string(i + 1), c);
            g_trunk = std::move(c.input);
        }
        return g;
    }

    std::vector<CheckpointBlock> to_checkpoint() const {
        std::vector<CheckpointBlock> out;
        out.reserve(blocks_.size());
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            out.push_back(to_block(names_[i], blocks_[i]));
        }
        return out;
    }

    void load_from_checkpoint(const std::vector<CheckpointBlock>& cp) {
        std::size_t found = 0;
        for (const CheckpointBlock& b : cp) {
            int idx = block_index(b.name);
            if (idx < 0) continue; // optimizer state and friends live in the same file
            Tensor<T> t = from_block<T>(b);
            if (t.shape != blocks_[static_cast<std::size_t>(idx)].shape) {
                throw std::invalid_argument("checkpoint block '" + b.name + "' has shape " +
                                            t.shape_str() + ", model expects " +
                                            blocks_[static_cast<std::size_t>(idx)].shape_str());
            }
            blocks_[static_cast<std::size_t>(idx)] = std::move(t);
            ++found;
        }
        if (found != blocks_.size()) {
            throw std::invalid_argument("checkpoint is missing " +
                                        std::to_string(blocks_.size() - found) +
                                        " parameter block(s)");
        }
    }

private:
    int reg_pad1() const { return cfg_.reg_conv1.dilation * (cfg_.reg_conv1.kernel - 1) / 2; }
    int reg_pad2() const { return cfg_.reg_conv2.dilation * (cfg_.reg_conv2.kernel - 1) / 2; }

    const Tensor<T>& cblock(const std::string& name) const {
        return blocks_[static_cast<std::size_t>(index_.at(name))];
    }

    void add_block(const std::string& name, std::vector<int> shape) {
        index_[name] = static_cast<int>(blocks_.size());
        names_.push_back(name);
        blocks_.emplace_back(std::move(shape));
    }

    template <typename G>
    void assign(std::vector<Tensor<T>>& g, const std::string& prefix, G& grads) const {
        g[static_cast<std::size_t>(index_.at(prefix + ".w"))] = std::move(grads.weight);
        g[static_cast<std::size_t>(index_.at(prefix + ".b"))] = std::move(grads.bias);
    }

    void build_blocks() {
        int in_c = 3;
        for (std::size_t i = 0; i < cfg_.trunk_channels.size(); ++i) {
            int c = cfg_.trunk_channels[i];
            add_block("trunk.conv" + std::to_string(i + 1) + ".w", {c, in_c, 3, 3});
            add_block("trunk.conv" + std::to_string(i + 1) + ".b", {c});
            in_c = c;
        }
        int trunk_c = in_c;
        for (std::size_t i = 0; i < cfg_.mask_branch.size(); ++i) {
            const ConvSpec& s = cfg_.mask_branch[i];
            add_block("mask.conv" + std::to_string(i + 1) + ".w", {s.channels, in_c, s.kernel, s.kernel});
            add_block("mask.conv" + std::to_string(i + 1) + ".b", {s.channels});
            in_c = s.channels;
        }
        add_block("mask.out.w", {1, in_c, 1, 1});
        add_block("mask.out.b", {1});

        add_block("reg.conv1.w", {cfg_.reg_conv1.channels, trunk_c, cfg_.reg_conv1.kernel,
                                  cfg_.reg_conv1.kernel});
        add_block("reg.conv1.b", {cfg_.reg_conv1.channels});
        add_block("reg.conv2.w", {cfg_.reg_conv2.channels, cfg_.reg_conv1.channels,
                                  cfg_.reg_conv2.kernel, cfg_.reg_conv2.kernel});
        add_block("reg.conv2.b", {cfg_.reg_conv2.channels});

        reg_flat_n_ = cfg_.reg_conv2.channels * cfg_.pool2_h() * cfg_.pool2_w();
        add_block("reg.fc.w", {cfg_.branch_fc, reg_flat_n_});
        add_block("reg.fc.b", {cfg_.branch_fc});

        int tap_c = cfg_.mask_branch[ModelConfig::kSkipTap - 1].channels;
        skip_flat_n_ = tap_c * cfg_.skip_h() * cfg_.skip_w();
        add_block("skip.fc.w", {cfg_.branch_fc, skip_flat_n_});
        add_block("skip.fc.b", {cfg_.branch_fc});

        add_block("fuse.fc.w", {cfg_.fuse_fc, cfg_.branch_fc});
        add_block("fuse.fc.b", {cfg_.fuse_fc});

        add_block("head.joints.w", {ModelConfig::kJointsOut, cfg_.fuse_fc});
        add_block("head.joints.b", {ModelConfig::kJointsOut});
        add_block("head.base.w", {ModelConfig::kBaseOut, cfg_.fuse_fc});
        add_block("head.base.b", {ModelConfig::kBaseOut});
        add_block("head.type.w", {ModelConfig::kTypeOut, cfg_.fuse_fc});
        add_block("head.type.b", {ModelConfig::kTypeOut});
    }

    ModelConfig cfg_;
    std::vector<std::string> names_;
    std::vector<Tensor<T>> blocks_;
    std::map<std::string, int> index_;
    int reg_flat_n_ = 0;
    int skip_flat_n_ = 0;
};

} // namespace rpnet
