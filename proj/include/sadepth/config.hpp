#pragma once

#include <json.hpp>

#include <string>
#include <vector>

#include "sadepth/data.hpp"
#include "sadepth/evaluation.hpp"
#include "sadepth/networks.hpp"
#include "sadepth/trainer.hpp"

namespace sadepth::config {

struct SynthSpec {
    data::SyntheticScene scene;
    int64_t val_frame_count = 12;
    double val_start_x = 0.021; // offset of the held-out camera path
};

struct Resolved {
    nlohmann::json tree; // the fully resolved configuration
    net::DepthNetConfig depth;
    net::PoseNetConfig pose;
    train::TrainConfig train;
    data::DatasetConfig dataset;
    eval::EvalProtocol protocol;
    SynthSpec synth;
    std::string split_train = "train.txt";
    std::string split_val = "val.txt";
    bool export_maps = false;
    bool export_attention = false;
};

/// Loads a JSON config file (optional), applies `--set key=value` overrides
/// (dotted paths, JSON-parsed values), validates every key against the schema
/// and materializes the typed configs. Unknown keys raise with the full valid
/// key list.
Resolved load(const std::string& path, const std::vector<std::string>& overrides);

/// Writes the resolved tree for provenance.
void echo(const Resolved& cfg, const std::string& out_dir);

} // namespace sadepth::config
