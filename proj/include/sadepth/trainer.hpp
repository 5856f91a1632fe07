#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sadepth/data.hpp"
#include "sadepth/evaluation.hpp"
#include "sadepth/losses.hpp"
#include "sadepth/networks.hpp"

namespace sadepth::train {

struct TrainConfig {
    int64_t epochs = 20;
    double lr = 1e-4;
    double lr_after_decay = 1e-5;
    int64_t decay_epoch = 15;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int64_t batch_size = 4;
    double smoothness_lambda = 1e-3;
    uint64_t seed = 42;
    bool identity_tiebreak_noise = false;
    double tiebreak_noise_std = 1e-5;

    void validate() const;
};

double lr_schedule(int64_t epoch, const TrainConfig& cfg);

/// Standard Adam with bias correction; one moment pair per parameter.
class Adam {
public:
    Adam(std::vector<Var> params, double beta1, double beta2, double eps);

    /// Applies one update from the accumulated gradients, then zeroes them.
    void step(double lr);

    int64_t step_count() const { return t_; }
    const std::vector<Var>& params() const { return params_; }
    std::vector<Tensor>& moment1() { return m_; }
    std::vector<Tensor>& moment2() { return v_; }
    void set_step_count(int64_t t) { t_ = t; }

private:
    std::vector<Var> params_;
    std::vector<Tensor> m_, v_;
    double beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

struct StepLog {
    int64_t epoch = 0;
    int64_t step = 0;
    double lr = 0;
    losses::LossBreakdown breakdown;
};

struct FitHistory {
    std::vector<double> step_total;       // per optimizer step
    std::vector<double> step_photometric;
    std::vector<double> val_abs_rel;      // per epoch
    std::string best_checkpoint;
    int64_t best_epoch = -1;
};

class Trainer {
public:
    Trainer(net::DepthNetConfig depth_cfg, net::PoseNetConfig pose_cfg, TrainConfig cfg);

    /// One optimizer step over a batch of augmented triplets.
    StepLog train_step(const std::vector<data::AugmentedPair>& batch);

    /// Epoch loop with per-epoch validation and checkpoints. `log_path`, when
    /// non-empty, receives one JSON line per step.
    FitHistory fit(const std::vector<data::TripletRecord>& train_records,
                   const std::vector<eval::EvalItem>& val_items, const std::string& out_dir,
                   const std::string& log_path = "");

    void save_checkpoint(const std::string& path) const;
    void load_checkpoint(const std::string& path);
    /// Restores networks (not optimizer state) from an inference checkpoint.
    static std::pair<net::DepthNetConfig, net::PoseNetConfig> peek_config(const std::string& path);

    net::DepthNet& depth_net() { return *depth_; }
    net::PoseNet& pose_net() { return *pose_; }
    const TrainConfig& config() const { return cfg_; }
    int64_t global_step() const { return global_step_; }

private:
    TrainConfig cfg_;
    net::DepthNetConfig depth_cfg_;
    net::PoseNetConfig pose_cfg_;
    std::unique_ptr<net::DepthNet> depth_;
    std::unique_ptr<net::PoseNet> pose_;
    std::unique_ptr<Adam> adam_;
    Rng rng_;
    int64_t global_step_ = 0;
    int64_t epoch_ = 0;

    friend struct TrainerAccess;
};

/// Serialize one step log as a JSON line; doubles keep full precision.
std::string step_log_json(const StepLog& log);

} // namespace sadepth::train
