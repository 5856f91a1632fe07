#include "sadepth/data.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sadepth/image_io.hpp"

namespace fs = std::filesystem;

namespace sadepth::data {

namespace {

constexpr double kPi = 3.14159265358979323846;

double gray_at(const Tensor& img, int64_t i, int64_t plane) {
    return 0.299 * img[i] + 0.587 * img[plane + i] + 0.114 * img[2 * plane + i];
}

double clamp01(double v) { return std::min(std::max(v, 0.0), 1.0); }

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double d = mx - mn;
    v = mx;
    s = mx > 0 ? d / mx : 0.0;
    if (d <= 0) {
        h = 0;
        return;
    }
    if (mx == r) {
        h = (g - b) / d;
    } else if (mx == g) {
        h = 2.0 + (b - r) / d;
    } else {
        h = 4.0 + (r - g) / d;
    }
    h /= 6.0;
    if (h < 0) h += 1.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
    h = h - std::floor(h);
    const double hh = h * 6.0;
    const int i = static_cast<int>(hh) % 6;
    const double f = hh - std::floor(hh);
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (i) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
}

std::string frame_name(int64_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06lld", static_cast<long long>(index));
    return std::string(buf) + ".png";
}

std::string find_frame(const fs::path& dir, int64_t index) {
    const fs::path padded = dir / frame_name(index);
    if (fs::exists(padded)) return padded.string();
    const fs::path plain = dir / (std::to_string(index) + ".png");
    if (fs::exists(plain)) return plain.string();
    return {};
}

double mean_abs_diff(const Tensor& a, const Tensor& b) {
    double s = 0;
    for (int64_t i = 0; i < a.numel(); ++i) s += std::fabs(a[i] - b[i]);
    return s / static_cast<double>(a.numel());
}

} // namespace

Tensor flip_horizontal(const Tensor& image) {
    const int64_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
    Tensor out({c, h, w});
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t y = 0; y < h; ++y)
            for (int64_t x = 0; x < w; ++x)
                out[(ch * h + y) * w + x] = image[(ch * h + y) * w + (w - 1 - x)];
    return out;
}

Tensor adjust_brightness(const Tensor& image, double factor) {
    Tensor out(image.shape());
    for (int64_t i = 0; i < image.numel(); ++i) out[i] = clamp01(image[i] * factor);
    return out;
}

Tensor adjust_contrast(const Tensor& image, double factor) {
    const int64_t plane = image.dim(1) * image.dim(2);
    double mean = 0;
    for (int64_t i = 0; i < plane; ++i) mean += gray_at(image, i, plane);
    mean /= static_cast<double>(plane);
    Tensor out(image.shape());
    for (int64_t i = 0; i < image.numel(); ++i) out[i] = clamp01(mean + (image[i] - mean) * factor);
    return out;
}

Tensor adjust_saturation(const Tensor& image, double factor) {
    const int64_t plane = image.dim(1) * image.dim(2);
    Tensor out(image.shape());
    for (int64_t i = 0; i < plane; ++i) {
        const double gray = gray_at(image, i, plane);
        for (int64_t c = 0; c < 3; ++c) {
            out[c * plane + i] = clamp01(gray + (image[c * plane + i] - gray) * factor);
        }
    }
    return out;
}

Tensor adjust_hue(const Tensor& image, double delta_turns) {
    const int64_t plane = image.dim(1) * image.dim(2);
    Tensor out(image.shape());
    for (int64_t i = 0; i < plane; ++i) {
        double h, s, v;
        rgb_to_hsv(image[i], image[plane + i], image[2 * plane + i], h, s, v);
        double r, g, b;
        hsv_to_rgb(h + delta_turns, s, v, r, g, b);
        out[i] = clamp01(r);
        out[plane + i] = clamp01(g);
        out[2 * plane + i] = clamp01(b);
    }
    return out;
}

AugmentedPair augment(const TrainingTriplet& triplet, const AugmentationConfig& cfg, Rng& rng) {
    AugmentedPair out{triplet, triplet};

    // One draw per augmentation in a fixed order; factors are sampled even
    // when the augmentation is skipped so streams stay aligned.
    const bool do_flip = rng.bernoulli(cfg.flip_prob);
    const bool do_bright = rng.bernoulli(cfg.jitter_prob);
    const double f_bright = rng.uniform(1.0 - cfg.brightness, 1.0 + cfg.brightness);
    const bool do_contrast = rng.bernoulli(cfg.jitter_prob);
    const double f_contrast = rng.uniform(1.0 - cfg.contrast, 1.0 + cfg.contrast);
    const bool do_sat = rng.bernoulli(cfg.jitter_prob);
    const double f_sat = rng.uniform(1.0 - cfg.saturation, 1.0 + cfg.saturation);
    const bool do_hue = rng.bernoulli(cfg.jitter_prob);
    const double f_hue = rng.uniform(-cfg.hue, cfg.hue);

    auto each = [](TrainingTriplet& t, const auto& fn) {
        t.prev = fn(t.prev);
        t.center = fn(t.center);
        t.next = fn(t.next);
    };

    if (do_flip) {
        each(out.net_input, [](const Tensor& t) { return flip_horizontal(t); });
        each(out.loss_target, [](const Tensor& t) { return flip_horizontal(t); });
        const double w = static_cast<double>(triplet.intrinsics.width);
        out.net_input.intrinsics.cx = w - 1.0 - triplet.intrinsics.cx;
        out.loss_target.intrinsics.cx = out.net_input.intrinsics.cx;
    }
    if (do_bright) each(out.net_input, [&](const Tensor& t) { return adjust_brightness(t, f_bright); });
    if (do_contrast) each(out.net_input, [&](const Tensor& t) { return adjust_contrast(t, f_contrast); });
    if (do_sat) each(out.net_input, [&](const Tensor& t) { return adjust_saturation(t, f_sat); });
    if (do_hue) each(out.net_input, [&](const Tensor& t) { return adjust_hue(t, f_hue); });
    return out;
}

geometry::Intrinsics load_intrinsics(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_intrinsics: cannot open " + path);
    nlohmann::json j;
    f >> j;
    geometry::Intrinsics k;
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
    k.width = j.at("width").get<int64_t>();
    k.height = j.at("height").get<int64_t>();
    k.validate();
    return k;
}

void save_intrinsics(const std::string& path, const geometry::Intrinsics& k) {
    nlohmann::json j{{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_intrinsics: cannot open " + path);
    f << j.dump(2) << "\n";
}

std::vector<TripletRecord> scan_triplets(const std::string& root, const std::string& split_file,
                                         const DatasetConfig& cfg, std::vector<std::string>* warnings) {
    if (!fs::exists(root)) throw std::runtime_error("scan_triplets: missing root directory " + root);
    std::ifstream split(split_file);
    if (!split) throw std::runtime_error("scan_triplets: cannot open split file " + split_file);

    std::vector<TripletRecord> records;
    std::string line;
    int64_t line_no = 0;
    while (std::getline(split, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string sequence;
        int64_t frame = -1;
        if (!(is >> sequence >> frame) || frame < 0) {
            throw std::runtime_error("scan_triplets: malformed split line " + std::to_string(line_no) + ": '" + line +
                                     "'");
        }
        const fs::path seq_dir = fs::path(root) / sequence;
        TripletRecord rec;
        rec.sequence = sequence;
        rec.frame_index = frame;
        rec.paths[1] = find_frame(seq_dir, frame);
        rec.paths[0] = frame > 0 ? find_frame(seq_dir, frame - 1) : std::string();
        rec.paths[2] = find_frame(seq_dir, frame + 1);
        if (rec.paths[0].empty() || rec.paths[1].empty() || rec.paths[2].empty()) {
            if (warnings) {
                warnings->push_back("skipping " + sequence + " frame " + std::to_string(frame) +
                                    ": missing neighbour frame");
            }
            continue;
        }
        rec.intrinsics = load_intrinsics((seq_dir / "intrinsics.json").string());
        if (cfg.static_filter) {
            const Tensor center = io::load_image(rec.paths[1]);
            const Tensor prev = io::load_image(rec.paths[0]);
            const Tensor next = io::load_image(rec.paths[2]);
            const double motion = std::min(mean_abs_diff(center, prev), mean_abs_diff(center, next));
            if (motion < cfg.static_filter_threshold) {
                if (warnings) {
                    warnings->push_back("skipping " + sequence + " frame " + std::to_string(frame) +
                                        ": static (mean abs diff " + std::to_string(motion) + ")");
                }
                continue;
            }
        }
        records.push_back(std::move(rec));
    }
    return records;
}

TrainingTriplet load_triplet(const TripletRecord& record) {
    TrainingTriplet t;
    t.prev = io::load_image(record.paths[0]);
    t.center = io::load_image(record.paths[1]);
    t.next = io::load_image(record.paths[2]);
    t.intrinsics = record.intrinsics;
    t.sequence = record.sequence;
    t.frame_index = record.frame_index;
    return t;
}

geometry::Intrinsics SyntheticScene::intrinsics() const {
    geometry::Intrinsics k;
    k.fx = focal;
    k.fy = focal;
    k.cx = (static_cast<double>(width) - 1.0) / 2.0;
    k.cy = (static_cast<double>(height) - 1.0) / 2.0;
    k.width = width;
    k.height = height;
    return k;
}

SyntheticScene SyntheticScene::banded_desk() {
    // Wide field of view so rotational flow cannot mimic translation, depth
    // ratio near/far of 2 so no band loses its automask under a uniform
    // disparity fit, and scene units sized so the 0.01-scaled pose head can
    // reach the per-frame translation within a few hundred steps.
    SyntheticScene scene;
    scene.width = 96;
    scene.height = 64;
    scene.focal = 45.0;
    scene.frame_count = 60;
    scene.baseline_x = 0.00134;
    scene.noise_std = 0.0;
    scene.seed = 3;
    PlaneSpec near_band{.depth = 0.05, .y_min = 0.0102, .textured = true, .texture_scale = 70.0, .texture_seed = 11};
    PlaneSpec mid_band{.depth = 0.07, .y_min = -0.0222, .y_max = 0.0244, .textured = true, .texture_scale = 35.0,
                       .texture_seed = 23};
    PlaneSpec far_backdrop{.depth = 0.1, .textured = false, .color = {0.62, 0.62, 0.62}};
    scene.planes = {near_band, mid_band, far_backdrop};
    return scene;
}

void SyntheticScene::validate() const {
    if (planes.empty()) throw std::invalid_argument("SyntheticScene: at least one plane required");
    for (const PlaneSpec& p : planes) {
        if (!(p.depth > 0)) throw std::invalid_argument("SyntheticScene: plane depths must be positive");
    }
    if (frame_count < 3) throw std::invalid_argument("SyntheticScene: at least three frames required");
    if (noise_std < 0) throw std::invalid_argument("SyntheticScene: noise_std must be non-negative");
}

namespace {

// Smooth multi-octave texture in [0,1]; phases and orientations derived from
// the seed so planes can carry distinct patterns.
double texture_value(uint64_t seed, int channel, double x, double y, double scale) {
    double v = 0.0, amp = 0.55;
    Rng r(seed * 1315423911ULL + static_cast<uint64_t>(channel) * 2654435761ULL + 17);
    double freq = 0.9 * scale;
    for (int o = 0; o < 3; ++o) {
        const double theta = r.uniform(0.0, 2.0 * kPi);
        const double phase1 = r.uniform(0.0, 2.0 * kPi);
        const double phase2 = r.uniform(0.0, 2.0 * kPi);
        const double cx = std::cos(theta), sx = std::sin(theta);
        v += amp * 0.5 *
             (std::sin(2.0 * kPi * freq * (x * cx + y * sx) + phase1) +
              std::sin(2.0 * kPi * freq * (x * sx - y * cx) * 0.73 + phase2));
        amp *= 0.45;
        freq *= 2.1;
    }
    return clamp01(0.5 + 0.5 * v);
}

struct Hit {
    const PlaneSpec* plane = nullptr;
    double depth = 0; // camera-frame z
    double xw = 0, yw = 0;
};

Hit cast_ray(const std::vector<const PlaneSpec*>& sorted_planes, const geometry::RigidTransform& cam_to_world,
             double dir_x, double dir_y) {
    // camera ray (dir_x, dir_y, 1) in camera coordinates
    const geometry::Vec3 dir_world = {cam_to_world.rotation[0][0] * dir_x + cam_to_world.rotation[0][1] * dir_y +
                                          cam_to_world.rotation[0][2],
                                      cam_to_world.rotation[1][0] * dir_x + cam_to_world.rotation[1][1] * dir_y +
                                          cam_to_world.rotation[1][2],
                                      cam_to_world.rotation[2][0] * dir_x + cam_to_world.rotation[2][1] * dir_y +
                                          cam_to_world.rotation[2][2]};
    const geometry::Vec3& org = cam_to_world.translation;
    Hit hit;
    for (const PlaneSpec* p : sorted_planes) {
        if (std::fabs(dir_world[2]) < 1e-12) continue;
        const double s = (p->depth - org[2]) / dir_world[2];
        if (s <= 0) continue;
        const double xw = org[0] + s * dir_world[0];
        if (xw < p->x_min || xw >= p->x_max) continue;
        const double yw = org[1] + s * dir_world[1];
        if (yw < p->y_min || yw >= p->y_max) continue;
        hit.plane = p;
        hit.depth = s; // dir has unit z in camera frame, so s is camera depth
        hit.xw = xw;
        hit.yw = yw;
        return hit;
    }
    return hit;
}

std::array<double, 3> shade(const Hit& hit) {
    if (!hit.plane) return {0, 0, 0};
    if (!hit.plane->textured) return hit.plane->color;
    std::array<double, 3> c;
    for (int ch = 0; ch < 3; ++ch) {
        c[static_cast<size_t>(ch)] =
            texture_value(hit.plane->texture_seed, ch, hit.xw, hit.yw, hit.plane->texture_scale);
    }
    return c;
}

} // namespace

geometry::RigidTransform SyntheticData::relative(int64_t t, int64_t t_prime) const {
    return geometry::compose(geometry::invert(cam_to_world[static_cast<size_t>(t_prime)]),
                             cam_to_world[static_cast<size_t>(t)]);
}

SyntheticData generate_synthetic(const SyntheticScene& scene) {
    scene.validate();
    SyntheticData out;
    out.intrinsics = scene.intrinsics();
    const geometry::Intrinsics& k = out.intrinsics;

    std::vector<const PlaneSpec*> sorted;
    for (const PlaneSpec& p : scene.planes) sorted.push_back(&p);
    std::sort(sorted.begin(), sorted.end(), [](const PlaneSpec* a, const PlaneSpec* b) { return a->depth < b->depth; });

    // 4x supersampled intrinsics aligned with the coarse pixel centres
    const int64_t ss = 4;
    const double fxf = k.fx * ss, fyf = k.fy * ss;
    const double cxf = k.cx * ss + 1.5, cyf = k.cy * ss + 1.5;

    Rng noise_rng(scene.seed);
    for (int64_t f = 0; f < scene.frame_count; ++f) {
        geometry::RigidTransform pose;
        pose.translation = {scene.start_x + static_cast<double>(f) * scene.baseline_x, 0.0, 0.0};
        out.cam_to_world.push_back(pose);

        Tensor frame({3, scene.height, scene.width});
        Tensor depth({1, scene.height, scene.width});
        const int64_t plane = scene.height * scene.width;
        for (int64_t v = 0; v < scene.height; ++v) {
            for (int64_t u = 0; u < scene.width; ++u) {
                std::array<double, 3> acc = {0, 0, 0};
                for (int64_t dv = 0; dv < ss; ++dv) {
                    for (int64_t du = 0; du < ss; ++du) {
                        const double uf = static_cast<double>(u * ss + du);
                        const double vf = static_cast<double>(v * ss + dv);
                        const Hit hit = cast_ray(sorted, pose, (uf - cxf) / fxf, (vf - cyf) / fyf);
                        const std::array<double, 3> c = shade(hit);
                        for (int ch = 0; ch < 3; ++ch) acc[static_cast<size_t>(ch)] += c[static_cast<size_t>(ch)];
                    }
                }
                for (int ch = 0; ch < 3; ++ch) {
                    frame[ch * plane + v * scene.width + u] = acc[static_cast<size_t>(ch)] / double(ss * ss);
                }
                const Hit hit =
                    cast_ray(sorted, pose, (static_cast<double>(u) - k.cx) / k.fx, (static_cast<double>(v) - k.cy) / k.fy);
                depth[v * scene.width + u] = hit.plane ? hit.depth : 0.0;
            }
        }
        if (scene.noise_std > 0) {
            for (int64_t i = 0; i < frame.numel(); ++i) {
                frame[i] = clamp01(frame[i] + scene.noise_std * noise_rng.normal());
            }
        }
        out.frames.push_back(std::move(frame));
        out.depths.push_back(std::move(depth));
    }
    return out;
}

void write_dataset(const SyntheticData& d, const std::string& root, const std::string& sequence) {
    const fs::path seq_dir = fs::path(root) / sequence;
    fs::create_directories(seq_dir / "depth");
    save_intrinsics((seq_dir / "intrinsics.json").string(), d.intrinsics);
    nlohmann::json poses = nlohmann::json::array();
    for (size_t f = 0; f < d.frames.size(); ++f) {
        io::save_image_u8((seq_dir / frame_name(static_cast<int64_t>(f))).string(), d.frames[f]);
        std::string depth_name = frame_name(static_cast<int64_t>(f));
        depth_name.replace(depth_name.size() - 4, 4, ".f32");
        io::save_f32((seq_dir / "depth" / depth_name).string(), d.depths[f]);
        const auto& t = d.cam_to_world[f];
        nlohmann::json p;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) p["rotation"].push_back(t.rotation[i][j]);
        for (int i = 0; i < 3; ++i) p["translation"].push_back(t.translation[i]);
        poses.push_back(std::move(p));
    }
    std::ofstream pf(seq_dir / "poses.json");
    pf << nlohmann::json{{"frames", poses}}.dump(2) << "\n";
}

void write_split(const std::string& path, const std::string& sequence, int64_t first, int64_t last) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_split: cannot open " + path);
    for (int64_t i = first; i <= last; ++i) f << sequence << " " << i << "\n";
}

} // namespace sadepth::data
