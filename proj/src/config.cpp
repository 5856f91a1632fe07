#include "sadepth/config.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace sadepth::config {

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s = {
        {"model",
         {"preset", "input_height", "input_width", "stem_channels", "stage_channels", "stage_blocks", "stage_strides",
          "dilations", "attention_channels", "ddv_bins", "min_depth", "max_depth", "bin_spacing", "attention_on",
          "ddv_on", "scale_scores", "decoder_channels"}},
        {"pose", {"preset", "widths", "output_scale"}},
        {"train",
         {"epochs", "lr", "lr_after_decay", "decay_epoch", "adam_beta1", "adam_beta2", "batch_size",
          "smoothness_lambda", "seed", "identity_tiebreak_noise", "tiebreak_noise_std", "attention_on", "ddv_on"}},
        {"data", {"static_filter", "static_filter_threshold", "split_train", "split_val"}},
        {"eval", {"min_depth_clamp", "max_depth_cap", "median_scaling", "export_maps", "crop_border"}},
        {"infer", {"export_attention"}},
        // aliases matching the flag names used in the design notes
        {"loss", {"identity_tiebreak_noise"}},
        {"ddv", {"spacing"}},
        {"attention", {"scale_scores"}},
        {"synth",
         {"width", "height", "focal", "frame_count", "baseline_x", "start_x", "noise_std", "seed", "planes",
          "val_frame_count", "val_start_x"}},
    };
    return s;
}

std::string valid_key_list() {
    std::ostringstream os;
    bool first = true;
    for (const auto& [section, keys] : schema()) {
        for (const auto& k : keys) {
            if (!first) os << ", ";
            os << section << "." << k;
            first = false;
        }
    }
    return os.str();
}

void reject_unknown(const nlohmann::json& tree) {
    for (auto it = tree.begin(); it != tree.end(); ++it) {
        auto sec = schema().find(it.key());
        if (sec == schema().end()) {
            throw std::invalid_argument("unknown config section '" + it.key() + "'. Valid keys: " + valid_key_list());
        }
        if (!it.value().is_object()) {
            throw std::invalid_argument("config section '" + it.key() + "' must be an object");
        }
        for (auto jt = it.value().begin(); jt != it.value().end(); ++jt) {
            if (!sec->second.count(jt.key())) {
                throw std::invalid_argument("unknown config key '" + it.key() + "." + jt.key() +
                                            "'. Valid keys: " + valid_key_list());
            }
        }
    }
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void apply_override(nlohmann::json& tree, const std::string& setting) {
    const size_t eq = setting.find('=');
    if (eq == std::string::npos) {
        throw std::invalid_argument("override '" + setting + "' is not of the form key=value");
    }
    const std::string path = setting.substr(0, eq);
    const std::string raw = setting.substr(eq + 1);
    nlohmann::json value;
    try {
        value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error&) {
        value = raw; // plain string
    }
    nlohmann::json* node = &tree;
    size_t start = 0;
    while (true) {
        const size_t dot = path.find('.', start);
        const std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw std::invalid_argument("override path '" + path + "' has an empty segment");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            break;
        }
        node = &((*node)[part]);
        start = dot + 1;
    }
}

data::PlaneSpec plane_from_json(const nlohmann::json& j) {
    data::PlaneSpec p;
    read(j, "depth", p.depth);
    read(j, "x_min", p.x_min);
    read(j, "x_max", p.x_max);
    read(j, "y_min", p.y_min);
    read(j, "y_max", p.y_max);
    read(j, "textured", p.textured);
    if (j.contains("color")) {
        auto c = j.at("color").get<std::vector<double>>();
        if (c.size() != 3) throw std::invalid_argument("synth plane color needs three components");
        p.color = {c[0], c[1], c[2]};
    }
    read(j, "texture_scale", p.texture_scale);
    read(j, "texture_seed", p.texture_seed);
    for (const auto& [k, v] : j.items()) {
        static const std::set<std::string> keys = {"depth",    "x_min", "x_max",         "y_min",
                                                   "y_max",    "textured", "color",      "texture_scale",
                                                   "texture_seed"};
        if (!keys.count(k)) throw std::invalid_argument("unknown synth plane key '" + k + "'");
    }
    return p;
}

} // namespace

Resolved load(const std::string& path, const std::vector<std::string>& overrides) {
    nlohmann::json tree = nlohmann::json::object();
    if (!path.empty()) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("cannot open config file " + path);
        f >> tree;
    }
    for (const std::string& s : overrides) apply_override(tree, s);
    reject_unknown(tree);

    Resolved out;
    out.tree = tree;

    nlohmann::json model = tree.value("model", nlohmann::json::object());
    const std::string preset = model.value("preset", std::string("desk"));
    if (preset == "full") {
        out.depth = net::DepthNetConfig::full();
    } else if (preset == "desk") {
        out.depth = net::DepthNetConfig::desk();
    } else {
        throw std::invalid_argument("model.preset must be 'full' or 'desk'");
    }
    read(model, "input_height", out.depth.input_height);
    read(model, "input_width", out.depth.input_width);
    read(model, "stem_channels", out.depth.stem_channels);
    read(model, "stage_channels", out.depth.stage_channels);
    read(model, "stage_blocks", out.depth.stage_blocks);
    read(model, "stage_strides", out.depth.stage_strides);
    read(model, "dilations", out.depth.dilations);
    read(model, "attention_channels", out.depth.attention_channels);
    read(model, "ddv_bins", out.depth.ddv_bins);
    read(model, "min_depth", out.depth.min_depth);
    read(model, "max_depth", out.depth.max_depth);
    if (model.contains("bin_spacing")) {
        const std::string sp = model.at("bin_spacing").get<std::string>();
        if (sp == "linear-disparity") {
            out.depth.bin_spacing = ddv::BinSpacing::kLinearDisparity;
        } else if (sp == "linear-log-depth") {
            out.depth.bin_spacing = ddv::BinSpacing::kLinearLogDepth;
        } else {
            throw std::invalid_argument("model.bin_spacing must be 'linear-disparity' or 'linear-log-depth'");
        }
    }
    read(model, "attention_on", out.depth.attention_on);
    read(model, "ddv_on", out.depth.ddv_on);
    read(model, "scale_scores", out.depth.scale_scores);
    read(model, "decoder_channels", out.depth.decoder_channels);

    nlohmann::json pose = tree.value("pose", nlohmann::json::object());
    const std::string pose_preset = pose.value("preset", preset);
    out.pose = pose_preset == "full" ? net::PoseNetConfig::full() : net::PoseNetConfig::desk();
    read(pose, "widths", out.pose.widths);
    read(pose, "output_scale", out.pose.output_scale);

    nlohmann::json tr = tree.value("train", nlohmann::json::object());
    read(tr, "epochs", out.train.epochs);
    read(tr, "lr", out.train.lr);
    read(tr, "lr_after_decay", out.train.lr_after_decay);
    read(tr, "decay_epoch", out.train.decay_epoch);
    read(tr, "adam_beta1", out.train.adam_beta1);
    read(tr, "adam_beta2", out.train.adam_beta2);
    read(tr, "batch_size", out.train.batch_size);
    read(tr, "smoothness_lambda", out.train.smoothness_lambda);
    read(tr, "seed", out.train.seed);
    read(tr, "identity_tiebreak_noise", out.train.identity_tiebreak_noise);
    read(tr, "tiebreak_noise_std", out.train.tiebreak_noise_std);
    // TrainConfig-level ablation flags mirror onto the model config
    read(tr, "attention_on", out.depth.attention_on);
    read(tr, "ddv_on", out.depth.ddv_on);

    nlohmann::json loss = tree.value("loss", nlohmann::json::object());
    read(loss, "identity_tiebreak_noise", out.train.identity_tiebreak_noise);
    nlohmann::json ddvj = tree.value("ddv", nlohmann::json::object());
    if (ddvj.contains("spacing")) {
        const std::string sp = ddvj.at("spacing").get<std::string>();
        if (sp == "linear-disparity") {
            out.depth.bin_spacing = ddv::BinSpacing::kLinearDisparity;
        } else if (sp == "linear-log-depth") {
            out.depth.bin_spacing = ddv::BinSpacing::kLinearLogDepth;
        } else {
            throw std::invalid_argument("ddv.spacing must be 'linear-disparity' or 'linear-log-depth'");
        }
    }
    nlohmann::json attn = tree.value("attention", nlohmann::json::object());
    read(attn, "scale_scores", out.depth.scale_scores);

    nlohmann::json dt = tree.value("data", nlohmann::json::object());
    read(dt, "static_filter", out.dataset.static_filter);
    read(dt, "static_filter_threshold", out.dataset.static_filter_threshold);
    read(dt, "split_train", out.split_train);
    read(dt, "split_val", out.split_val);

    nlohmann::json ev = tree.value("eval", nlohmann::json::object());
    read(ev, "min_depth_clamp", out.protocol.min_depth_clamp);
    read(ev, "max_depth_cap", out.protocol.max_depth_cap);
    read(ev, "median_scaling", out.protocol.median_scaling);
    read(ev, "crop_border", out.protocol.crop_border);
    read(ev, "export_maps", out.export_maps);

    nlohmann::json inf = tree.value("infer", nlohmann::json::object());
    read(inf, "export_attention", out.export_attention);

    nlohmann::json sy = tree.value("synth", nlohmann::json::object());
    read(sy, "width", out.synth.scene.width);
    read(sy, "height", out.synth.scene.height);
    read(sy, "focal", out.synth.scene.focal);
    read(sy, "frame_count", out.synth.scene.frame_count);
    read(sy, "baseline_x", out.synth.scene.baseline_x);
    read(sy, "start_x", out.synth.scene.start_x);
    read(sy, "noise_std", out.synth.scene.noise_std);
    read(sy, "seed", out.synth.scene.seed);
    read(sy, "val_frame_count", out.synth.val_frame_count);
    read(sy, "val_start_x", out.synth.val_start_x);
    if (sy.contains("planes")) {
        out.synth.scene.planes.clear();
        for (const auto& pj : sy.at("planes")) out.synth.scene.planes.push_back(plane_from_json(pj));
    }
    return out;
}

void echo(const Resolved& cfg, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::ofstream f(std::filesystem::path(out_dir) / "resolved_config.json");
    f << cfg.tree.dump(2) << "\n";
}

} // namespace sadepth::config
