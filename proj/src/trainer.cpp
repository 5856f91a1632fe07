#include "sadepth/trainer.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "sadepth/checkpoint.hpp"
#include "sadepth/disparity.hpp"

namespace sadepth::train {

namespace op = sadepth::ops;

void TrainConfig::validate() const {
    if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be non-negative");
    if (!(lr_after_decay > 0) || !(lr_after_decay <= lr)) {
        throw std::invalid_argument("TrainConfig: require 0 < lr_after_decay <= lr");
    }
    if (decay_epoch >= epochs && epochs > 0) {
        throw std::invalid_argument("TrainConfig: decay_epoch must be below epochs");
    }
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be positive");
    if (smoothness_lambda < 0) throw std::invalid_argument("TrainConfig: smoothness weight must be non-negative");
}

double lr_schedule(int64_t epoch, const TrainConfig& cfg) {
    if (epoch < 0 || epoch >= cfg.epochs) throw std::invalid_argument("lr_schedule: epoch out of range");
    return epoch < cfg.decay_epoch ? cfg.lr : cfg.lr_after_decay;
}

Adam::Adam(std::vector<Var> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const Var& p : params_) {
        m_.emplace_back(p.shape());
        v_.emplace_back(p.shape());
    }
}

void Adam::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        Var& p = params_[i];
        double* w = p.value_mut().data();
        double* g = p.grad().data();
        double* m = m_[i].data();
        double* v = v_[i].data();
        const int64_t n = p.numel();
        for (int64_t j = 0; j < n; ++j) {
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            w[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
            g[j] = 0.0;
        }
    }
}

Trainer::Trainer(net::DepthNetConfig depth_cfg, net::PoseNetConfig pose_cfg, TrainConfig cfg)
    : cfg_(cfg), depth_cfg_(std::move(depth_cfg)), pose_cfg_(std::move(pose_cfg)), rng_(cfg.seed) {
    cfg_.validate();
    Rng init_rng = rng_.fork(0xD33F);
    depth_ = std::make_unique<net::DepthNet>(depth_cfg_, init_rng);
    pose_ = std::make_unique<net::PoseNet>(pose_cfg_, init_rng);
    std::vector<Var> params;
    for (auto& p : depth_->parameters()) params.push_back(p.var);
    for (auto& p : pose_->parameters()) params.push_back(p.var);
    adam_ = std::make_unique<Adam>(std::move(params), cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps);
}

namespace {

Tensor stack_frames(const std::vector<data::AugmentedPair>& batch, const Tensor data::TrainingTriplet::* frame,
                    bool net_input) {
    const Tensor& first = net_input ? batch[0].net_input.*frame : batch[0].loss_target.*frame;
    const int64_t c = first.dim(0), h = first.dim(1), w = first.dim(2);
    Tensor out({static_cast<int64_t>(batch.size()), c, h, w});
    for (size_t i = 0; i < batch.size(); ++i) {
        const Tensor& src = net_input ? batch[i].net_input.*frame : batch[i].loss_target.*frame;
        std::copy_n(src.data(), src.numel(), out.data() + static_cast<int64_t>(i) * src.numel());
    }
    return out;
}

} // namespace

StepLog Trainer::train_step(const std::vector<data::AugmentedPair>& batch) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    const geometry::Intrinsics k = batch[0].loss_target.intrinsics;
    for (const auto& pair : batch) {
        if (pair.loss_target.intrinsics.width != k.width || pair.loss_target.intrinsics.height != k.height) {
            throw std::invalid_argument("train_step: mixed image sizes in a batch");
        }
    }

    Var net_center = Var::constant(stack_frames(batch, &data::TrainingTriplet::center, true));
    Var net_prev = Var::constant(stack_frames(batch, &data::TrainingTriplet::prev, true));
    Var net_next = Var::constant(stack_frames(batch, &data::TrainingTriplet::next, true));
    Var loss_center = Var::constant(stack_frames(batch, &data::TrainingTriplet::center, false));
    Var loss_prev = Var::constant(stack_frames(batch, &data::TrainingTriplet::prev, false));
    Var loss_next = Var::constant(stack_frames(batch, &data::TrainingTriplet::next, false));

    net::MultiScaleDisparity disp = depth_->forward(net_center, /*training=*/true);

    net::PoseOutput pose_prev = pose_->forward(net_center, net_prev, /*training=*/true);
    net::PoseOutput pose_next = pose_->forward(net_center, net_next, /*training=*/true);
    Var rot_prev = geometry::rodrigues(pose_prev.axis_angle);
    Var rot_next = geometry::rodrigues(pose_next.axis_angle);

    const std::vector<Var> sources = {loss_prev, loss_next};
    std::vector<std::vector<Var>> synthesized(net::MultiScaleDisparity::kScaleCount);
    for (size_t s = 0; s < synthesized.size(); ++s) {
        Var depth_map = ddv::disparity_to_depth(disp.disparity_full[s]);
        synthesized[s].push_back(losses::synthesize_view(loss_prev, depth_map, rot_prev, pose_prev.translation, k));
        synthesized[s].push_back(losses::synthesize_view(loss_next, depth_map, rot_next, pose_next.translation, k));
    }

    std::optional<Tensor> tie_noise;
    if (cfg_.identity_tiebreak_noise) {
        Tensor noise({static_cast<int64_t>(batch.size()), 1, k.height, k.width});
        Rng noise_rng = rng_.fork(0xA11CE000ULL + static_cast<uint64_t>(global_step_));
        for (int64_t i = 0; i < noise.numel(); ++i) noise[i] = cfg_.tiebreak_noise_std * noise_rng.normal();
        tie_noise = std::move(noise);
    }
    std::vector<Tensor> masks;
    for (size_t s = 0; s < synthesized.size(); ++s) {
        masks.push_back(losses::automask(loss_center, sources, synthesized[s], tie_noise ? &*tie_noise : nullptr));
    }

    losses::ReprojectionLoss lp = losses::min_reprojection_loss(loss_center, sources, synthesized, masks);

    Var ls;
    for (size_t s = 0; s < synthesized.size(); ++s) {
        Var term = losses::smoothness_loss(disp.disparity_full[s], loss_center);
        ls = ls.defined() ? op::add(ls, term) : term;
    }
    ls = op::mul_scalar(ls, 1.0 / static_cast<double>(synthesized.size()));

    losses::LossBreakdown breakdown = losses::total_loss(lp.loss, ls, cfg_.smoothness_lambda);
    breakdown.per_scale_photometric = lp.per_scale;
    breakdown.mask_density = lp.mask_density;

    if (!std::isfinite(breakdown.total_value)) {
        throw std::runtime_error("train_step: non-finite loss at step " + std::to_string(global_step_) +
                                 " (batch of " + batch[0].loss_target.sequence + " frame " +
                                 std::to_string(batch[0].loss_target.frame_index) + ")");
    }

    breakdown.total.backward();
    const double lr = epoch_ < cfg_.decay_epoch ? cfg_.lr : cfg_.lr_after_decay;
    adam_->step(lr);

    StepLog log;
    log.epoch = epoch_;
    log.step = global_step_;
    log.lr = lr;
    log.breakdown = std::move(breakdown);
    ++global_step_;
    return log;
}

FitHistory Trainer::fit(const std::vector<data::TripletRecord>& train_records,
                        const std::vector<eval::EvalItem>& val_items, const std::string& out_dir,
                        const std::string& log_path) {
    if (train_records.empty()) throw std::invalid_argument("fit: empty dataset");
    std::filesystem::create_directories(out_dir);
    std::ofstream log_file;
    if (!log_path.empty()) {
        log_file.open(log_path);
        if (!log_file) throw std::runtime_error("fit: cannot open log " + log_path);
    }

    FitHistory history;
    double best_abs_rel = std::numeric_limits<double>::infinity();
    const data::AugmentationConfig aug_cfg;

    for (epoch_ = 0; epoch_ < cfg_.epochs; ++epoch_) {
        std::vector<size_t> order(train_records.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle_rng = rng_.fork(0x5u + static_cast<uint64_t>(epoch_));
        for (size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<size_t>(shuffle_rng.uniform_index(static_cast<int64_t>(i)))]);
        }

        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg_.batch_size)) {
            const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg_.batch_size));
            std::vector<data::AugmentedPair> batch;
            for (size_t i = start; i < end; ++i) {
                data::TrainingTriplet t = data::load_triplet(train_records[order[i]]);
                Rng aug_rng = rng_.fork(0xB00000ULL + static_cast<uint64_t>(epoch_) * 1000003ULL +
                                        static_cast<uint64_t>(order[i]));
                batch.push_back(data::augment(t, aug_cfg, aug_rng));
            }
            StepLog log = train_step(batch);
            history.step_total.push_back(log.breakdown.total_value);
            history.step_photometric.push_back(log.breakdown.photometric);
            if (log_file) log_file << step_log_json(log) << "\n";
        }

        // per-epoch validation with median-scaled AbsRel
        double val = std::numeric_limits<double>::quiet_NaN();
        if (!val_items.empty()) {
            eval::EvalProtocol protocol;
            protocol.max_depth_cap = depth_cfg_.max_depth;
            eval::EvalResult res = eval::evaluate_frames(*depth_, val_items, protocol, eval::workers_from_env());
            val = res.aggregate.abs_rel;
        }
        history.val_abs_rel.push_back(val);

        const std::string ckpt_path = out_dir + "/epoch_" + std::to_string(epoch_) + ".ckpt";
        save_checkpoint(ckpt_path);
        if (!val_items.empty() && val < best_abs_rel) {
            best_abs_rel = val;
            history.best_checkpoint = ckpt_path;
            history.best_epoch = epoch_;
        }
    }
    if (history.best_checkpoint.empty()) {
        const std::string final_path = out_dir + "/final.ckpt";
        save_checkpoint(final_path);
        history.best_checkpoint = final_path;
        history.best_epoch = cfg_.epochs - 1;
    }
    return history;
}

namespace {

nlohmann::json depth_config_json(const net::DepthNetConfig& c) {
    return nlohmann::json{{"input_height", c.input_height},
                          {"input_width", c.input_width},
                          {"stem_channels", c.stem_channels},
                          {"stage_channels", c.stage_channels},
                          {"stage_blocks", c.stage_blocks},
                          {"stage_strides", c.stage_strides},
                          {"dilations", c.dilations},
                          {"attention_channels", c.attention_channels},
                          {"ddv_bins", c.ddv_bins},
                          {"min_depth", c.min_depth},
                          {"max_depth", c.max_depth},
                          {"bin_spacing", c.bin_spacing == ddv::BinSpacing::kLinearDisparity ? "linear-disparity"
                                                                                             : "linear-log-depth"},
                          {"attention_on", c.attention_on},
                          {"ddv_on", c.ddv_on},
                          {"scale_scores", c.scale_scores},
                          {"decoder_channels", c.decoder_channels}};
}

net::DepthNetConfig depth_config_from_json(const nlohmann::json& j) {
    net::DepthNetConfig c;
    c.input_height = j.at("input_height").get<int64_t>();
    c.input_width = j.at("input_width").get<int64_t>();
    c.stem_channels = j.at("stem_channels").get<std::vector<int64_t>>();
    c.stage_channels = j.at("stage_channels").get<std::vector<int64_t>>();
    c.stage_blocks = j.at("stage_blocks").get<std::vector<int64_t>>();
    c.stage_strides = j.at("stage_strides").get<std::vector<int64_t>>();
    c.dilations = j.at("dilations").get<std::vector<int64_t>>();
    c.attention_channels = j.at("attention_channels").get<int64_t>();
    c.ddv_bins = j.at("ddv_bins").get<int64_t>();
    c.min_depth = j.at("min_depth").get<double>();
    c.max_depth = j.at("max_depth").get<double>();
    c.bin_spacing = j.at("bin_spacing").get<std::string>() == "linear-log-depth" ? ddv::BinSpacing::kLinearLogDepth
                                                                                 : ddv::BinSpacing::kLinearDisparity;
    c.attention_on = j.at("attention_on").get<bool>();
    c.ddv_on = j.at("ddv_on").get<bool>();
    c.scale_scores = j.at("scale_scores").get<bool>();
    c.decoder_channels = j.at("decoder_channels").get<std::vector<int64_t>>();
    return c;
}

} // namespace

void Trainer::save_checkpoint(const std::string& path) const {
    nlohmann::json meta;
    meta["depth_config"] = depth_config_json(depth_cfg_);
    meta["pose_config"] = {{"widths", pose_cfg_.widths}, {"output_scale", pose_cfg_.output_scale}};
    meta["adam_step"] = adam_->step_count();
    meta["global_step"] = global_step_;
    meta["epoch"] = epoch_;
    meta["rng"] = rng_.serialize();
    meta["train_config"] = {{"epochs", cfg_.epochs},
                            {"lr", cfg_.lr},
                            {"lr_after_decay", cfg_.lr_after_decay},
                            {"decay_epoch", cfg_.decay_epoch},
                            {"adam_beta1", cfg_.adam_beta1},
                            {"adam_beta2", cfg_.adam_beta2},
                            {"batch_size", cfg_.batch_size},
                            {"smoothness_lambda", cfg_.smoothness_lambda},
                            {"seed", cfg_.seed},
                            {"identity_tiebreak_noise", cfg_.identity_tiebreak_noise}};

    std::vector<std::pair<std::string, const Tensor*>> arrays;
    std::vector<nn::NamedParam> dp = depth_->parameters();
    std::vector<nn::NamedParam> pp = pose_->parameters();
    for (auto& p : dp) arrays.emplace_back(p.name, &p.var.value());
    for (auto& p : pp) arrays.emplace_back(p.name, &p.var.value());
    std::vector<nn::NamedBuffer> db = depth_->buffers();
    std::vector<nn::NamedBuffer> pb = pose_->buffers();
    for (auto& b : db) arrays.emplace_back("buffer." + b.name, b.tensor);
    for (auto& b : pb) arrays.emplace_back("buffer." + b.name, b.tensor);

    std::vector<Tensor>& m1 = adam_->moment1();
    std::vector<Tensor>& m2 = adam_->moment2();
    size_t idx = 0;
    for (auto& p : dp) {
        arrays.emplace_back("adam.m." + p.name, &m1[idx]);
        arrays.emplace_back("adam.v." + p.name, &m2[idx]);
        ++idx;
    }
    for (auto& p : pp) {
        arrays.emplace_back("adam.m." + p.name, &m1[idx]);
        arrays.emplace_back("adam.v." + p.name, &m2[idx]);
        ++idx;
    }
    ckpt::save(path, meta, arrays);
}

void Trainer::load_checkpoint(const std::string& path) {
    ckpt::Archive ar = ckpt::load(path);
    global_step_ = ar.meta.at("global_step").get<int64_t>();
    epoch_ = ar.meta.at("epoch").get<int64_t>();
    rng_ = Rng::deserialize(ar.meta.at("rng").get<std::string>());
    adam_->set_step_count(ar.meta.at("adam_step").get<int64_t>());

    std::vector<nn::NamedParam> dp = depth_->parameters();
    std::vector<nn::NamedParam> pp = pose_->parameters();
    std::vector<Tensor>& m1 = adam_->moment1();
    std::vector<Tensor>& m2 = adam_->moment2();
    size_t idx = 0;
    auto restore = [&](std::vector<nn::NamedParam>& params) {
        for (auto& p : params) {
            const Tensor& saved = ar.require(p.name);
            if (saved.shape() != p.var.shape()) {
                throw std::runtime_error("load_checkpoint: shape mismatch for " + p.name);
            }
            p.var.value_mut() = saved;
            m1[idx] = ar.require("adam.m." + p.name);
            m2[idx] = ar.require("adam.v." + p.name);
            ++idx;
        }
    };
    restore(dp);
    restore(pp);
    for (auto& b : depth_->buffers()) *b.tensor = ar.require("buffer." + b.name);
    for (auto& b : pose_->buffers()) *b.tensor = ar.require("buffer." + b.name);
}

std::pair<net::DepthNetConfig, net::PoseNetConfig> Trainer::peek_config(const std::string& path) {
    ckpt::Archive ar = ckpt::load(path);
    net::DepthNetConfig dc = depth_config_from_json(ar.meta.at("depth_config"));
    net::PoseNetConfig pc;
    pc.widths = ar.meta.at("pose_config").at("widths").get<std::vector<int64_t>>();
    pc.output_scale = ar.meta.at("pose_config").at("output_scale").get<double>();
    return {dc, pc};
}

std::string step_log_json(const StepLog& log) {
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    std::string out = "{\"step\":" + std::to_string(log.step) + ",\"epoch\":" + std::to_string(log.epoch) +
                      ",\"lr\":" + num(log.lr) + ",\"total\":" + num(log.breakdown.total_value) +
                      ",\"photometric\":" + num(log.breakdown.photometric) +
                      ",\"smoothness\":" + num(log.breakdown.smoothness) + ",\"per_scale\":[";
    for (size_t i = 0; i < log.breakdown.per_scale_photometric.size(); ++i) {
        if (i) out += ",";
        out += num(log.breakdown.per_scale_photometric[i]);
    }
    out += "],\"mask_density\":[";
    for (size_t i = 0; i < log.breakdown.mask_density.size(); ++i) {
        if (i) out += ",";
        out += num(log.breakdown.mask_density[i]);
    }
    out += "]}";
    return out;
}

} // namespace sadepth::train
