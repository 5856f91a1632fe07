#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sadepth/attention.hpp"
#include "sadepth/disparity.hpp"
#include "sadepth/nn.hpp"

namespace sadepth::net {

struct DepthNetConfig {
    int64_t input_height = 192;
    int64_t input_width = 640;
    std::vector<int64_t> stem_channels = {64, 64, 128};
    std::vector<int64_t> stage_channels = {256, 512, 1024, 2048};
    std::vector<int64_t> stage_blocks = {3, 4, 27, 3};
    std::vector<int64_t> stage_strides = {1, 2, 1, 1};
    std::vector<int64_t> dilations = {1, 1, 2, 4};
    int64_t attention_channels = 512;
    int64_t ddv_bins = 128;
    double min_depth = 0.1;
    double max_depth = 100.0;
    ddv::BinSpacing bin_spacing = ddv::BinSpacing::kLinearDisparity;
    bool attention_on = true;
    bool ddv_on = true;
    bool scale_scores = false;
    // upconv3, deconv3, upconv2, deconv2, upconv1, deconv1
    std::vector<int64_t> decoder_channels = {64, 64, 64, 64, 32, 32};

    static DepthNetConfig full();
    static DepthNetConfig desk();
    void validate() const;
};

/// Disparity at scales {1/8, 1/4, 1/2, 1/1}, each also upsampled to input
/// resolution, plus the raw per-scale volumes when the DDV heads are on.
struct MultiScaleDisparity {
    std::vector<ddv::DisparityVolume> volumes; // empty when ddv is off
    std::vector<Var> disparity_raw;
    std::vector<Var> disparity_full;
    ddv::DisparityBins bins;

    static constexpr int64_t kScaleCount = 4;
};

struct Bottleneck {
    nn::Conv2d conv1, conv2, conv3;
    nn::BatchNorm2d bn1, bn2, bn3;
    bool has_downsample = false;
    nn::Conv2d down_conv;
    nn::BatchNorm2d down_bn;

    static Bottleneck create(int64_t in_ch, int64_t out_ch, int64_t stride, int64_t dilation, Rng& rng);
    Var forward(const Var& x, bool training);
    void collect(const std::string& prefix, std::vector<nn::NamedParam>& params);
    void collect_buffers(const std::string& prefix, std::vector<nn::NamedBuffer>& buffers);
};

class DepthNet {
public:
    DepthNet(DepthNetConfig cfg, Rng& rng);

    MultiScaleDisparity forward(const Var& image, bool training);

    std::vector<nn::NamedParam> parameters();
    std::vector<nn::NamedBuffer> buffers();
    const DepthNetConfig& config() const { return cfg_; }
    const ddv::DisparityBins& bins() const { return bins_; }
    /// Attention weights of the most recent forward (batch 0), empty when the
    /// context module is off.
    const Tensor& last_attention() const { return last_attention_; }

    /// Trainable parameter count derived from the config alone; agrees with
    /// the constructed network.
    static int64_t count_parameters(const DepthNetConfig& cfg);

private:
    DepthNetConfig cfg_;
    ddv::DisparityBins bins_;
    nn::Conv2d stem1_, stem2_, stem3_;
    nn::BatchNorm2d sbn1_, sbn2_, sbn3_;
    std::vector<std::vector<Bottleneck>> stages_;
    attention::AttentionProjections attn_;
    nn::Conv2d head8_, head4_, head2_, head1_;
    nn::Conv2d upconv3_, deconv3_, upconv2_, deconv2_, upconv1_, deconv1_;
    Tensor last_attention_;

    Var head_to_disparity(const nn::Conv2d& head, const Var& features, MultiScaleDisparity& out);
};

struct PoseNetConfig {
    std::vector<int64_t> widths = {16, 32, 64, 128, 256};
    double output_scale = 0.01;

    static PoseNetConfig full() { return PoseNetConfig{}; }
    static PoseNetConfig desk() { return PoseNetConfig{{8, 16, 32}, 0.01}; }
};

struct PoseOutput {
    Var axis_angle;  // (N, 3)
    Var translation; // (N, 3)
};

class PoseNet {
public:
    PoseNet(PoseNetConfig cfg, Rng& rng);

    /// Relative transform estimate for the (frame_a, frame_b) pair; the final
    /// linear layer starts at zero so training begins from the identity.
    PoseOutput forward(const Var& frame_a, const Var& frame_b, bool training);

    std::vector<nn::NamedParam> parameters();
    std::vector<nn::NamedBuffer> buffers();
    const PoseNetConfig& config() const { return cfg_; }

private:
    PoseNetConfig cfg_;
    std::vector<nn::Conv2d> convs_;
    std::vector<nn::BatchNorm2d> bns_;
    nn::Linear head_;
};

} // namespace sadepth::net
