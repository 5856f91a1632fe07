#include "sadepth/networks.hpp"

#include <stdexcept>

namespace sadepth::net {

namespace op = sadepth::ops;

DepthNetConfig DepthNetConfig::full() { return DepthNetConfig{}; }

DepthNetConfig DepthNetConfig::desk() {
    DepthNetConfig c;
    c.input_height = 64;
    c.input_width = 96;
    c.stem_channels = {8, 8, 16};
    c.stage_channels = {16, 24, 32, 48};
    c.stage_blocks = {1, 1, 1, 1};
    c.attention_channels = 48;
    c.ddv_bins = 16;
    c.decoder_channels = {16, 16, 16, 16, 8, 8};
    // disparity range bracketing the banded desk scene
    c.min_depth = 0.03;
    c.max_depth = 0.5;
    return c;
}

void DepthNetConfig::validate() const {
    if (input_height % 8 != 0 || input_width % 8 != 0) {
        throw std::invalid_argument("DepthNetConfig: input dimensions must be divisible by 8");
    }
    if (stem_channels.size() != 3) throw std::invalid_argument("DepthNetConfig: three stem convolutions expected");
    if (stage_channels.size() != 4 || stage_blocks.size() != 4 || dilations.size() != 4) {
        throw std::invalid_argument("DepthNetConfig: four residual stages expected");
    }
    if (stage_strides != std::vector<int64_t>{1, 2, 1, 1}) {
        throw std::invalid_argument("DepthNetConfig: stage strides must be {1,2,1,1} (bottleneck at 1/8)");
    }
    for (int64_t ch : stage_channels) {
        if (ch % 4 != 0) throw std::invalid_argument("DepthNetConfig: stage widths must be divisible by 4");
    }
    if (decoder_channels.size() != 6) throw std::invalid_argument("DepthNetConfig: six decoder convolutions expected");
    if (ddv_bins < 2) throw std::invalid_argument("DepthNetConfig: at least two disparity bins required");
    if (!attention_on && attention_channels != stage_channels[3]) {
        throw std::invalid_argument(
            "DepthNetConfig: attention_on=false replaces the context module with identity, which requires "
            "attention_channels == encoder output channels");
    }
}

Bottleneck Bottleneck::create(int64_t in_ch, int64_t out_ch, int64_t stride, int64_t dilation, Rng& rng) {
    const int64_t planes = out_ch / 4;
    Bottleneck b;
    b.conv1 = nn::Conv2d::create(in_ch, planes, 1, 1, 0, 1, false, rng);
    b.bn1 = nn::BatchNorm2d::create(planes);
    b.conv2 = nn::Conv2d::create(planes, planes, 3, stride, dilation, dilation, false, rng);
    b.bn2 = nn::BatchNorm2d::create(planes);
    b.conv3 = nn::Conv2d::create(planes, out_ch, 1, 1, 0, 1, false, rng);
    b.bn3 = nn::BatchNorm2d::create(out_ch);
    if (stride != 1 || in_ch != out_ch) {
        b.has_downsample = true;
        b.down_conv = nn::Conv2d::create(in_ch, out_ch, 1, stride, 0, 1, false, rng);
        b.down_bn = nn::BatchNorm2d::create(out_ch);
    }
    return b;
}

Var Bottleneck::forward(const Var& x, bool training) {
    Var y = op::relu(bn1.forward(conv1.forward(x), training));
    y = op::relu(bn2.forward(conv2.forward(y), training));
    y = bn3.forward(conv3.forward(y), training);
    Var identity = has_downsample ? down_bn.forward(down_conv.forward(x), training) : x;
    return op::relu(op::add(y, identity));
}

void Bottleneck::collect(const std::string& prefix, std::vector<nn::NamedParam>& params) {
    conv1.collect(prefix + ".conv1", params);
    bn1.collect(prefix + ".bn1", params);
    conv2.collect(prefix + ".conv2", params);
    bn2.collect(prefix + ".bn2", params);
    conv3.collect(prefix + ".conv3", params);
    bn3.collect(prefix + ".bn3", params);
    if (has_downsample) {
        down_conv.collect(prefix + ".down", params);
        down_bn.collect(prefix + ".down_bn", params);
    }
}

void Bottleneck::collect_buffers(const std::string& prefix, std::vector<nn::NamedBuffer>& buffers) {
    bn1.collect_buffers(prefix + ".bn1", buffers);
    bn2.collect_buffers(prefix + ".bn2", buffers);
    bn3.collect_buffers(prefix + ".bn3", buffers);
    if (has_downsample) down_bn.collect_buffers(prefix + ".down_bn", buffers);
}

DepthNet::DepthNet(DepthNetConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
    cfg_.validate();
    bins_ = ddv::make_bins(cfg_.ddv_bins, cfg_.min_depth, cfg_.max_depth, cfg_.bin_spacing);

    stem1_ = nn::Conv2d::create(3, cfg_.stem_channels[0], 3, 1, 1, 1, false, rng);
    sbn1_ = nn::BatchNorm2d::create(cfg_.stem_channels[0]);
    stem2_ = nn::Conv2d::create(cfg_.stem_channels[0], cfg_.stem_channels[1], 3, 2, 1, 1, false, rng);
    sbn2_ = nn::BatchNorm2d::create(cfg_.stem_channels[1]);
    stem3_ = nn::Conv2d::create(cfg_.stem_channels[1], cfg_.stem_channels[2], 3, 1, 1, 1, false, rng);
    sbn3_ = nn::BatchNorm2d::create(cfg_.stem_channels[2]);

    int64_t in_ch = cfg_.stem_channels[2];
    for (int s = 0; s < 4; ++s) {
        std::vector<Bottleneck> blocks;
        for (int64_t b = 0; b < cfg_.stage_blocks[static_cast<size_t>(s)]; ++b) {
            const int64_t stride = b == 0 ? cfg_.stage_strides[static_cast<size_t>(s)] : 1;
            blocks.push_back(
                Bottleneck::create(in_ch, cfg_.stage_channels[static_cast<size_t>(s)], stride,
                                   cfg_.dilations[static_cast<size_t>(s)], rng));
            in_ch = cfg_.stage_channels[static_cast<size_t>(s)];
        }
        stages_.push_back(std::move(blocks));
    }

    const int64_t m = cfg_.stage_channels[3];
    const int64_t n_ctx = cfg_.attention_channels;
    if (cfg_.attention_on) attn_ = attention::AttentionProjections::create(m, n_ctx, rng);

    const int64_t head_out = cfg_.ddv_on ? cfg_.ddv_bins : 1;
    const auto& dec = cfg_.decoder_channels;
    head8_ = nn::Conv2d::create(n_ctx, head_out, 3, 1, 1, 1, true, rng);
    upconv3_ = nn::Conv2d::create(cfg_.ddv_on ? cfg_.ddv_bins : n_ctx, dec[0], 3, 1, 1, 1, true, rng);
    deconv3_ = nn::Conv2d::create(dec[0] + cfg_.stage_channels[0], dec[1], 3, 1, 1, 1, true, rng);
    head4_ = nn::Conv2d::create(dec[1], head_out, 3, 1, 1, 1, true, rng);
    upconv2_ = nn::Conv2d::create(dec[1], dec[2], 3, 1, 1, 1, true, rng);
    deconv2_ = nn::Conv2d::create(dec[2] + cfg_.stem_channels[2], dec[3], 3, 1, 1, 1, true, rng);
    head2_ = nn::Conv2d::create(dec[3], head_out, 3, 1, 1, 1, true, rng);
    upconv1_ = nn::Conv2d::create(dec[3], dec[4], 3, 1, 1, 1, true, rng);
    deconv1_ = nn::Conv2d::create(dec[4], dec[5], 3, 1, 1, 1, true, rng);
    head1_ = nn::Conv2d::create(dec[5], head_out, 3, 1, 1, 1, true, rng);
}

Var DepthNet::head_to_disparity(const nn::Conv2d& head, const Var& features, MultiScaleDisparity& out) {
    Var logits = head.forward(features);
    if (cfg_.ddv_on) {
        ddv::DisparityVolume volume{logits, bins_};
        Var disp = ddv::softargmax(volume);
        out.volumes.push_back(std::move(volume));
        return disp;
    }
    // sigmoid head scaled into the bin range
    const double lo = bins_.front(), hi = bins_.back();
    return op::add_scalar(op::mul_scalar(op::sigmoid(logits), hi - lo), lo);
}

MultiScaleDisparity DepthNet::forward(const Var& image, bool training) {
    const auto& is = image.shape();
    if (is.size() != 4 || is[1] != 3 || is[2] != cfg_.input_height || is[3] != cfg_.input_width) {
        throw std::invalid_argument("depth_forward: image must be (N,3," + std::to_string(cfg_.input_height) + "," +
                                    std::to_string(cfg_.input_width) + ")");
    }

    Var x = op::relu(sbn1_.forward(stem1_.forward(image), training));
    x = op::relu(sbn2_.forward(stem2_.forward(x), training));
    Var skip_half = op::relu(sbn3_.forward(stem3_.forward(x), training)); // 1/2
    x = op::maxpool2d(skip_half, 3, 2, 1);                                // 1/4
    for (auto& block : stages_[0]) x = block.forward(x, training);
    Var skip_quarter = x; // 1/4
    for (auto& block : stages_[1]) x = block.forward(x, training);
    for (auto& block : stages_[2]) x = block.forward(x, training);
    for (auto& block : stages_[3]) x = block.forward(x, training); // 1/8

    Var context;
    if (cfg_.attention_on) {
        attention::QkvMaps qkv = attention::project_qkv(x, attn_);
        Var weights = attention::attention_weights(qkv.query, qkv.key, cfg_.scale_scores);
        context = attention::attention_output(qkv.value, weights);
        const auto& ws = weights.shape();
        const int64_t p = ws[1];
        last_attention_ = Tensor({p, p});
        std::copy_n(weights.value().data(), p * p, last_attention_.data());
    } else {
        context = x;
        last_attention_ = Tensor();
    }

    MultiScaleDisparity out;
    out.bins = bins_;

    Var disp8 = head_to_disparity(head8_, context, out);
    Var trunk = cfg_.ddv_on ? out.volumes[0].logits : context;

    Var d = op::elu(upconv3_.forward(trunk));
    d = op::upsample_nearest2x(d);
    d = op::elu(deconv3_.forward(op::concat({d, skip_quarter}, 1)));
    Var disp4 = head_to_disparity(head4_, d, out);

    d = op::elu(upconv2_.forward(d));
    d = op::upsample_nearest2x(d);
    d = op::elu(deconv2_.forward(op::concat({d, skip_half}, 1)));
    Var disp2 = head_to_disparity(head2_, d, out);

    d = op::elu(upconv1_.forward(d));
    d = op::upsample_nearest2x(d);
    d = op::elu(deconv1_.forward(d));
    Var disp1 = head_to_disparity(head1_, d, out);

    out.disparity_raw = {disp8, disp4, disp2, disp1};
    out.disparity_full.reserve(4);
    for (const Var& disp : out.disparity_raw) {
        out.disparity_full.push_back(op::resize_bilinear(disp, cfg_.input_height, cfg_.input_width));
    }
    return out;
}

std::vector<nn::NamedParam> DepthNet::parameters() {
    std::vector<nn::NamedParam> p;
    stem1_.collect("depth.stem1", p);
    sbn1_.collect("depth.sbn1", p);
    stem2_.collect("depth.stem2", p);
    sbn2_.collect("depth.sbn2", p);
    stem3_.collect("depth.stem3", p);
    sbn3_.collect("depth.sbn3", p);
    for (size_t s = 0; s < stages_.size(); ++s) {
        for (size_t b = 0; b < stages_[s].size(); ++b) {
            stages_[s][b].collect("depth.stage" + std::to_string(s + 1) + ".block" + std::to_string(b), p);
        }
    }
    if (cfg_.attention_on) {
        p.push_back({"depth.attention.w_query", attn_.w_query});
        p.push_back({"depth.attention.w_key", attn_.w_key});
        p.push_back({"depth.attention.w_value", attn_.w_value});
    }
    head8_.collect("depth.head8", p);
    upconv3_.collect("depth.upconv3", p);
    deconv3_.collect("depth.deconv3", p);
    head4_.collect("depth.head4", p);
    upconv2_.collect("depth.upconv2", p);
    deconv2_.collect("depth.deconv2", p);
    head2_.collect("depth.head2", p);
    upconv1_.collect("depth.upconv1", p);
    deconv1_.collect("depth.deconv1", p);
    head1_.collect("depth.head1", p);
    return p;
}

std::vector<nn::NamedBuffer> DepthNet::buffers() {
    std::vector<nn::NamedBuffer> b;
    sbn1_.collect_buffers("depth.sbn1", b);
    sbn2_.collect_buffers("depth.sbn2", b);
    sbn3_.collect_buffers("depth.sbn3", b);
    for (size_t s = 0; s < stages_.size(); ++s) {
        for (size_t bl = 0; bl < stages_[s].size(); ++bl) {
            stages_[s][bl].collect_buffers("depth.stage" + std::to_string(s + 1) + ".block" + std::to_string(bl), b);
        }
    }
    return b;
}

int64_t DepthNet::count_parameters(const DepthNetConfig& cfg) {
    if (cfg.stem_channels.empty() && cfg.stage_channels.empty()) return 0;
    int64_t total = 0;
    auto conv = [&](int64_t in, int64_t out, int64_t k, bool bias) { total += in * out * k * k + (bias ? out : 0); };
    auto bn = [&](int64_t ch) { total += 2 * ch; };

    conv(3, cfg.stem_channels[0], 3, false);
    bn(cfg.stem_channels[0]);
    conv(cfg.stem_channels[0], cfg.stem_channels[1], 3, false);
    bn(cfg.stem_channels[1]);
    conv(cfg.stem_channels[1], cfg.stem_channels[2], 3, false);
    bn(cfg.stem_channels[2]);

    int64_t in_ch = cfg.stem_channels[2];
    for (size_t s = 0; s < 4; ++s) {
        const int64_t out_ch = cfg.stage_channels[s];
        const int64_t planes = out_ch / 4;
        for (int64_t b = 0; b < cfg.stage_blocks[s]; ++b) {
            const int64_t stride = b == 0 ? cfg.stage_strides[s] : 1;
            conv(in_ch, planes, 1, false);
            bn(planes);
            conv(planes, planes, 3, false);
            bn(planes);
            conv(planes, out_ch, 1, false);
            bn(out_ch);
            if (stride != 1 || in_ch != out_ch) {
                conv(in_ch, out_ch, 1, false);
                bn(out_ch);
            }
            in_ch = out_ch;
        }
    }

    const int64_t m = cfg.stage_channels[3];
    const int64_t n_ctx = cfg.attention_channels;
    if (cfg.attention_on) total += 3 * n_ctx * m;

    const int64_t head_out = cfg.ddv_on ? cfg.ddv_bins : 1;
    const auto& dec = cfg.decoder_channels;
    conv(n_ctx, head_out, 3, true);                            // head8
    conv(cfg.ddv_on ? cfg.ddv_bins : n_ctx, dec[0], 3, true);  // upconv3
    conv(dec[0] + cfg.stage_channels[0], dec[1], 3, true);     // deconv3
    conv(dec[1], head_out, 3, true);                           // head4
    conv(dec[1], dec[2], 3, true);                             // upconv2
    conv(dec[2] + cfg.stem_channels[2], dec[3], 3, true);      // deconv2
    conv(dec[3], head_out, 3, true);                           // head2
    conv(dec[3], dec[4], 3, true);                             // upconv1
    conv(dec[4], dec[5], 3, true);                             // deconv1
    conv(dec[5], head_out, 3, true);                           // head1
    return total;
}

PoseNet::PoseNet(PoseNetConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
    if (cfg_.widths.empty()) throw std::invalid_argument("PoseNetConfig: at least one stage required");
    int64_t in_ch = 6;
    for (int64_t w : cfg_.widths) {
        convs_.push_back(nn::Conv2d::create(in_ch, w, 3, 2, 1, 1, false, rng));
        bns_.push_back(nn::BatchNorm2d::create(w));
        in_ch = w;
    }
    head_ = nn::Linear::create_zero(in_ch, 6);
}

PoseOutput PoseNet::forward(const Var& frame_a, const Var& frame_b, bool training) {
    if (frame_a.shape() != frame_b.shape()) throw std::invalid_argument("pose_forward: frame shape mismatch");
    Var x = op::concat({frame_a, frame_b}, 1);
    for (size_t i = 0; i < convs_.size(); ++i) x = op::relu(bns_[i].forward(convs_[i].forward(x), training));
    Var pooled = op::global_avg_pool(x);
    Var out = op::mul_scalar(head_.forward(pooled), cfg_.output_scale);
    return PoseOutput{op::slice(out, 1, 0, 3), op::slice(out, 1, 3, 3)};
}

std::vector<nn::NamedParam> PoseNet::parameters() {
    std::vector<nn::NamedParam> p;
    for (size_t i = 0; i < convs_.size(); ++i) {
        convs_[i].collect("pose.conv" + std::to_string(i), p);
        bns_[i].collect("pose.bn" + std::to_string(i), p);
    }
    head_.collect("pose.head", p);
    return p;
}

std::vector<nn::NamedBuffer> PoseNet::buffers() {
    std::vector<nn::NamedBuffer> b;
    for (size_t i = 0; i < bns_.size(); ++i) bns_[i].collect_buffers("pose.bn" + std::to_string(i), b);
    return b;
}

} // namespace sadepth::net
