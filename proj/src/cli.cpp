#include "sadepth/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "sadepth/config.hpp"
#include "sadepth/data.hpp"
#include "sadepth/disparity.hpp"
#include "sadepth/evaluation.hpp"
#include "sadepth/gradient_suite.hpp"
#include "sadepth/image_io.hpp"
#include "sadepth/trainer.hpp"

namespace fs = std::filesystem;

namespace sadepth::cli {

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string data_dir;
    std::string checkpoint;
    std::vector<std::string> overrides;
    int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON configuration file");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--data", args.data_dir, "dataset directory");
    cmd->add_option("--checkpoint", args.checkpoint, "checkpoint file");
    cmd->add_option("--set", args.overrides, "override as key=value (repeatable)");
    cmd->add_option("--seed", args.seed, "seed override");
}

config::Resolved resolve(const CommonArgs& args) {
    config::Resolved cfg = config::load(args.config_path, args.overrides);
    if (args.seed >= 0) cfg.train.seed = static_cast<uint64_t>(args.seed);
    return cfg;
}

std::vector<eval::EvalItem> load_eval_items(const std::string& root, const std::string& split_file) {
    std::ifstream split(split_file);
    if (!split) throw std::runtime_error("cannot open split file " + split_file);
    std::vector<eval::EvalItem> items;
    std::string line;
    int64_t line_no = 0;
    while (std::getline(split, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string sequence;
        int64_t frame = -1;
        if (!(is >> sequence >> frame) || frame < 0) {
            throw std::runtime_error("malformed split line " + std::to_string(line_no) + ": '" + line + "'");
        }
        char name[32];
        std::snprintf(name, sizeof(name), "%06lld", static_cast<long long>(frame));
        const fs::path seq_dir = fs::path(root) / sequence;
        fs::path img = seq_dir / (std::string(name) + ".png");
        if (!fs::exists(img)) img = seq_dir / (std::to_string(frame) + ".png");
        eval::EvalItem item;
        item.image = io::load_image(img.string());
        // ground truth: raw float32, or 16-bit PNG with a scale sidecar
        const fs::path f32 = seq_dir / "depth" / (std::string(name) + ".f32");
        if (fs::exists(f32)) {
            item.gt_depth = io::load_f32(f32.string(), item.image.dim(1), item.image.dim(2));
        } else {
            const fs::path png16 = seq_dir / "depth" / (std::string(name) + ".png");
            const fs::path sidecar = seq_dir / "depth" / (std::string(name) + ".json");
            std::ifstream sf(sidecar);
            if (!sf) throw std::runtime_error("no ground-truth depth for " + sequence + "/" + name);
            nlohmann::json sj;
            sf >> sj;
            item.gt_depth = io::load_gray16(png16.string(), sj.at("scale").get<double>());
        }
        item.name = sequence + "/" + name;
        items.push_back(std::move(item));
    }
    return items;
}

void export_maps_for_image(net::DepthNet& net, const Tensor& image, const fs::path& out_dir, const std::string& stem,
                           bool with_attention) {
    NoGradGuard guard;
    Var batch = Var::constant(image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)}));
    net::MultiScaleDisparity ms = net.forward(batch, /*training=*/false);
    const Tensor disp = ms.disparity_full.back().value().reshaped({1, image.dim(1), image.dim(2)});
    const Tensor depth = ddv::disparity_to_depth(Var::constant(disp)).value();

    fs::create_directories(out_dir);
    // 16-bit disparity with a documented sidecar scale
    const double scale = 65535.0 / ms.bins.back();
    io::save_gray16((out_dir / (stem + "_disp.png")).string(), disp, scale);
    io::save_f32((out_dir / (stem + "_disp.f32")).string(), disp);
    io::save_f32((out_dir / (stem + "_depth.f32")).string(), depth);
    nlohmann::json sidecar{{"disparity_png_scale", scale},
                           {"disparity_units", "inverse scene units"},
                           {"width", image.dim(2)},
                           {"height", image.dim(1)}};

    if (!ms.volumes.empty()) {
        // canonical low-resolution DDV, upsampled for viewing
        Var unc_low = ddv::uncertainty(ms.volumes.front());
        const Tensor unc = ops::resize_bilinear(unc_low, image.dim(1), image.dim(2))
                               .value()
                               .reshaped({1, image.dim(1), image.dim(2)});
        io::save_f32((out_dir / (stem + "_uncertainty.f32")).string(), unc);
        double umax = 0;
        for (int64_t i = 0; i < unc.numel(); ++i) umax = std::max(umax, unc[i]);
        const double uscale = umax > 0 ? 65535.0 / umax : 1.0;
        io::save_gray16((out_dir / (stem + "_uncertainty.png")).string(), unc, uscale);
        sidecar["uncertainty_png_scale"] = uscale;
    }

    if (with_attention && !net.last_attention().empty()) {
        const int64_t h8 = net.config().input_height / 8, w8 = net.config().input_width / 8;
        std::vector<std::pair<int64_t, int64_t>> positions = {
            {w8 / 4, h8 / 4}, {3 * w8 / 4, h8 / 4}, {w8 / 4, 3 * h8 / 4}, {3 * w8 / 4, 3 * h8 / 4}};
        auto maps = attention::export_attention_maps(net.last_attention(), positions, h8, w8);
        nlohmann::json index = nlohmann::json::array();
        for (size_t i = 0; i < maps.size(); ++i) {
            double mx = 0;
            for (int64_t j = 0; j < maps[i].numel(); ++j) mx = std::max(mx, maps[i][j]);
            Tensor scaled = maps[i];
            if (mx > 0) {
                for (int64_t j = 0; j < scaled.numel(); ++j) scaled[j] /= mx;
            }
            const std::string name = stem + "_attn_" + std::to_string(i) + ".png";
            io::save_image_u8((out_dir / name).string(), scaled.reshaped({1, h8, w8}));
            index.push_back({{"file", name},
                             {"query_u", positions[i].first},
                             {"query_v", positions[i].second},
                             {"max_weight", mx}});
        }
        sidecar["attention_maps"] = index;
    }
    std::ofstream sf(out_dir / (stem + "_maps.json"));
    sf << sidecar.dump(2) << "\n";
}

int cmd_synth(const CommonArgs& args) {
    config::Resolved cfg = resolve(args);
    if (args.out_dir.empty()) throw std::invalid_argument("synth requires --out");
    config::echo(cfg, args.out_dir);

    data::SyntheticScene scene = cfg.synth.scene;
    if (scene.planes.empty()) {
        data::SyntheticScene defaults = data::SyntheticScene::banded_desk();
        scene.planes = defaults.planes;
    }
    data::SyntheticData train_seq = data::generate_synthetic(scene);
    data::write_dataset(train_seq, args.out_dir, "train");
    data::write_split(args.out_dir + "/" + cfg.split_train, "train", 0, scene.frame_count - 1);

    // held-out path starts between the training camera positions
    data::SyntheticScene val_scene = scene;
    val_scene.frame_count = cfg.synth.val_frame_count;
    val_scene.seed = scene.seed + 1;
    val_scene.start_x = cfg.synth.val_start_x;
    data::SyntheticData val_seq = data::generate_synthetic(val_scene);
    data::write_dataset(val_seq, args.out_dir, "val");
    data::write_split(args.out_dir + "/" + cfg.split_val, "val", 0, val_scene.frame_count - 1);
    std::cout << "wrote " << scene.frame_count << " train frames and " << val_scene.frame_count << " val frames to "
              << args.out_dir << "\n";
    return 0;
}

int cmd_train(const CommonArgs& args) {
    config::Resolved cfg = resolve(args);
    if (args.data_dir.empty()) throw std::invalid_argument("train requires --data");
    if (args.out_dir.empty()) throw std::invalid_argument("train requires --out");
    config::echo(cfg, args.out_dir);

    std::vector<std::string> warnings;
    std::vector<data::TripletRecord> records =
        data::scan_triplets(args.data_dir, args.data_dir + "/" + cfg.split_train, cfg.dataset, &warnings);
    for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";

    std::vector<eval::EvalItem> val_items;
    const std::string val_split = args.data_dir + "/" + cfg.split_val;
    if (fs::exists(val_split)) val_items = load_eval_items(args.data_dir, val_split);

    train::Trainer trainer(cfg.depth, cfg.pose, cfg.train);
    train::FitHistory history =
        trainer.fit(records, val_items, args.out_dir, args.out_dir + "/steps.jsonl");

    nlohmann::json hj;
    hj["val_abs_rel"] = history.val_abs_rel;
    hj["best_checkpoint"] = history.best_checkpoint;
    hj["best_epoch"] = history.best_epoch;
    hj["steps"] = history.step_total.size();
    std::ofstream hf(fs::path(args.out_dir) / "history.json");
    hf << hj.dump(2) << "\n";
    std::cout << "trained " << history.step_total.size() << " steps; best checkpoint " << history.best_checkpoint
              << "\n";
    return 0;
}

int cmd_eval(const CommonArgs& args) {
    config::Resolved cfg = resolve(args);
    if (args.checkpoint.empty()) throw std::invalid_argument("eval requires --checkpoint");
    if (args.data_dir.empty()) throw std::invalid_argument("eval requires --data");

    auto [depth_cfg, pose_cfg] = train::Trainer::peek_config(args.checkpoint);
    train::TrainConfig tc = cfg.train;
    tc.epochs = 0;
    train::Trainer trainer(depth_cfg, pose_cfg, tc);
    trainer.load_checkpoint(args.checkpoint);

    std::vector<eval::EvalItem> items = load_eval_items(args.data_dir, args.data_dir + "/" + cfg.split_val);
    if (items.empty()) throw std::runtime_error("no evaluation frames found");
    eval::EvalResult res = eval::evaluate_frames(trainer.depth_net(), items, cfg.protocol, eval::workers_from_env());

    const std::string table = eval::format_table(res);
    std::cout << table;
    if (!args.out_dir.empty()) {
        config::echo(cfg, args.out_dir);
        nlohmann::json rj;
        auto metric_json = [](const eval::DepthMetrics& m) {
            return nlohmann::json{{"abs_rel", m.abs_rel}, {"sq_rel", m.sq_rel},     {"rmse", m.rmse},
                                  {"rmse_log", m.rmse_log}, {"log10", m.log10},     {"a1", m.a1},
                                  {"a2", m.a2},             {"a3", m.a3}};
        };
        rj["aggregate"] = metric_json(res.aggregate);
        for (size_t i = 0; i < res.per_image.size(); ++i) {
            rj["per_image"].push_back({{"name", res.names[i]}, {"metrics", metric_json(res.per_image[i])}});
        }
        std::ofstream rf(fs::path(args.out_dir) / "metrics.json");
        rf << rj.dump(2) << "\n";
        std::ofstream tf(fs::path(args.out_dir) / "metrics.txt");
        tf << table;
        if (cfg.export_maps) {
            for (const auto& item : items) {
                std::string stem = item.name;
                for (char& c : stem) {
                    if (c == '/') c = '_';
                }
                export_maps_for_image(trainer.depth_net(), item.image, fs::path(args.out_dir) / "maps", stem,
                                      cfg.export_attention);
            }
        }
    }
    return 0;
}

int cmd_infer(const CommonArgs& args) {
    config::Resolved cfg = resolve(args);
    if (args.checkpoint.empty()) throw std::invalid_argument("infer requires --checkpoint");
    if (args.data_dir.empty()) throw std::invalid_argument("infer requires --data");
    if (args.out_dir.empty()) throw std::invalid_argument("infer requires --out");
    config::echo(cfg, args.out_dir);

    auto [depth_cfg, pose_cfg] = train::Trainer::peek_config(args.checkpoint);
    train::TrainConfig tc = cfg.train;
    tc.epochs = 0;
    train::Trainer trainer(depth_cfg, pose_cfg, tc);
    trainer.load_checkpoint(args.checkpoint);

    std::vector<fs::path> images;
    for (const auto& entry : fs::directory_iterator(args.data_dir)) {
        const std::string ext = entry.path().extension().string();
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") images.push_back(entry.path());
    }
    std::sort(images.begin(), images.end());
    if (images.empty()) throw std::runtime_error("no images found in " + args.data_dir);
    for (const fs::path& p : images) {
        Tensor image = io::load_image(p.string());
        export_maps_for_image(trainer.depth_net(), image, args.out_dir, p.stem().string(), cfg.export_attention);
    }
    std::cout << "exported maps for " << images.size() << " images to " << args.out_dir << "\n";
    return 0;
}

int cmd_gradcheck() {
    std::vector<gradsuite::SuiteEntry> entries = gradsuite::run();
    for (const auto& e : entries) {
        std::printf("%-18s max_rel_err %.3e  tolerance %.0e  %s\n", e.name.c_str(), e.max_rel_err, e.tolerance,
                    e.pass ? "ok" : "FAIL");
    }
    return gradsuite::all_pass(entries) ? 0 : 1;
}

} // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"self-supervised monocular depth with a self-attention context module and discrete disparity volume"};
    app.require_subcommand(1);

    CommonArgs train_args, eval_args, infer_args, synth_args;
    CLI::App* train_cmd = app.add_subcommand("train", "train depth and pose networks");
    add_common(train_cmd, train_args);
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint against ground-truth depth");
    add_common(eval_cmd, eval_args);
    CLI::App* infer_cmd = app.add_subcommand("infer", "export disparity/depth/uncertainty maps for images");
    add_common(infer_cmd, infer_args);
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic plane-scene dataset");
    add_common(synth_cmd, synth_args);
    app.add_subcommand("gradcheck", "finite-difference check of every differentiable kernel");

    std::vector<std::string> cli_args(args.rbegin(), args.rend());
    if (!cli_args.empty()) cli_args.pop_back(); // program name
    try {
        app.parse(cli_args);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) { // --help
            std::cout << app.help();
            return 0;
        }
        std::cout << "error: usage: " << e.what() << "\n";
        std::cout << app.help();
        return 2;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_args);
        if (eval_cmd->parsed()) return cmd_eval(eval_args);
        if (infer_cmd->parsed()) return cmd_infer(infer_args);
        if (synth_cmd->parsed()) return cmd_synth(synth_args);
        return cmd_gradcheck();
    } catch (const std::invalid_argument& e) {
        std::cout << "error: usage: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cout << "error: runtime: " << e.what() << "\n";
        return 1;
    }
}

} // namespace sadepth::cli
