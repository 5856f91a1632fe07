#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "sadepth/data.hpp"
#include "sadepth/image_io.hpp"
#include "sadepth/losses.hpp"
#include "support/testutil.hpp"

using namespace sadepth;
using namespace sadepth::data;
using testing::TempDir;

namespace {

SyntheticScene two_plane_scene() {
    SyntheticScene scene;
    scene.width = 48;
    scene.height = 32;
    scene.focal = 40.0;
    scene.frame_count = 5;
    scene.baseline_x = 0.05;
    scene.noise_std = 0.0;
    scene.seed = 9;
    PlaneSpec near_plane{.depth = 4.0, .x_max = 0.5, .textured = true, .texture_scale = 1.0, .texture_seed = 11};
    PlaneSpec far_plane{.depth = 8.0, .textured = true, .texture_scale = 0.8, .texture_seed = 23};
    scene.planes = {near_plane, far_plane};
    return scene;
}

} // namespace

TEST_CASE("synthetic generation is deterministic and respects plane depths") {
    SyntheticScene scene = two_plane_scene();
    SyntheticData a = generate_synthetic(scene);
    SyntheticData b = generate_synthetic(scene);
    REQUIRE(a.frames.size() == 5);
    for (size_t f = 0; f < a.frames.size(); ++f) {
        for (int64_t i = 0; i < a.frames[f].numel(); ++i) CHECK(a.frames[f][i] == b.frames[f][i]);
    }
    // left pixels see the near plane, right pixels the far plane (frame 0)
    CHECK(a.depths[0].at({0, 16, 2}) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(a.depths[0].at({0, 16, 45}) == doctest::Approx(8.0).epsilon(1e-12));
    // camera movement changes the frames
    double delta = 0;
    for (int64_t i = 0; i < a.frames[0].numel(); ++i) delta += std::fabs(a.frames[0][i] - a.frames[1][i]);
    CHECK(delta > 1.0);
}

TEST_CASE("zero camera motion with zero noise yields identical frames") {
    SyntheticScene scene = two_plane_scene();
    scene.baseline_x = 0.0;
    scene.frame_count = 3;
    SyntheticData d = generate_synthetic(scene);
    for (int64_t i = 0; i < d.frames[0].numel(); ++i) {
        CHECK(d.frames[0][i] == d.frames[1][i]);
        CHECK(d.frames[1][i] == d.frames[2][i]);
    }
}

TEST_CASE("plane-disparity law: integer pixel shift between frames") {
    SyntheticScene scene;
    scene.width = 64;
    scene.height = 32;
    scene.focal = 80.0;
    scene.frame_count = 3;
    scene.baseline_x = 0.05; // shift = fx*b/Z = 80*0.05/4 = 1 pixel exactly
    scene.seed = 3;
    scene.planes = {PlaneSpec{.depth = 4.0, .textured = true, .texture_scale = 1.0, .texture_seed = 7}};
    SyntheticData d = generate_synthetic(scene);
    const int64_t plane = scene.height * scene.width;
    double err = 0;
    int64_t count = 0;
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t v = 0; v < scene.height; ++v)
            for (int64_t u = 4; u < scene.width - 4; ++u) {
                // camera moved +x, so frame 1 at u sees what frame 0 saw at u+1
                err += std::fabs(d.frames[1][c * plane + v * scene.width + u] -
                                 d.frames[0][c * plane + v * scene.width + u + 1]);
                ++count;
            }
    CHECK(err / static_cast<double>(count) < 1e-9);
}

TEST_CASE("synthetic self-consistency: GT warp reconstructs the target") {
    SyntheticScene scene = two_plane_scene();
    scene.width = 64;
    scene.height = 48;
    scene.focal = 60.0;
    SyntheticData d = generate_synthetic(scene);
    const int64_t t = 2, src = 3;
    Var target_depth = Var::constant(d.depths[t].reshaped({1, 1, scene.height, scene.width}));
    Var source = Var::constant(d.frames[src].reshaped({1, 3, scene.height, scene.width}));
    geometry::RigidTransform rel = d.relative(t, src);
    Tensor recon = losses::synthesize_view(source, target_depth, rel, d.intrinsics).value();
    const Tensor& target = d.frames[t];
    double mae = 0;
    int64_t count = 0;
    const int64_t plane = scene.height * scene.width;
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t v = 4; v < scene.height - 4; ++v)
            for (int64_t u = 4; u < scene.width - 4; ++u) {
                mae += std::fabs(recon[c * plane + v * scene.width + u] - target[c * plane + v * scene.width + u]);
                ++count;
            }
    mae /= static_cast<double>(count);
    CHECK(mae < 1e-2);
}

TEST_CASE("dataset round trip through the directory layout") {
    TempDir dir("dataset");
    SyntheticScene scene = two_plane_scene();
    SyntheticData d = generate_synthetic(scene);
    write_dataset(d, dir.path().string(), "seq0");
    write_split((dir.path() / "all.txt").string(), "seq0", 0, scene.frame_count - 1);

    DatasetConfig cfg;
    cfg.static_filter = false;
    std::vector<std::string> warnings;
    std::vector<TripletRecord> recs = scan_triplets(dir.path().string(), (dir.path() / "all.txt").string(), cfg,
                                                    &warnings);
    // 5 frames -> frames 1..3 have both neighbours
    CHECK(recs.size() == 3);
    CHECK(warnings.size() == 2); // frames 0 and 4 skipped
    TrainingTriplet t = load_triplet(recs[0]);
    CHECK(t.center.shape() == std::vector<int64_t>{3, 32, 48});
    CHECK(t.intrinsics.fx == doctest::Approx(scene.focal));
    // 8-bit quantization bounds the reload error
    double max_err = 0;
    for (int64_t i = 0; i < t.center.numel(); ++i) {
        max_err = std::max(max_err, std::fabs(t.center[i] - d.frames[1][i]));
    }
    CHECK(max_err < 1.0 / 255.0);
}

TEST_CASE("scan_triplets errors and filters") {
    TempDir dir("scan");
    SyntheticScene scene = two_plane_scene();
    scene.frame_count = 3;
    scene.baseline_x = 0.0; // static sequence
    SyntheticData d = generate_synthetic(scene);
    write_dataset(d, dir.path().string(), "seq0");

    {
        std::ofstream split(dir.path() / "empty.txt");
    }
    DatasetConfig cfg;
    cfg.static_filter = false;
    CHECK(scan_triplets(dir.path().string(), (dir.path() / "empty.txt").string(), cfg).empty());

    {
        std::ofstream split(dir.path() / "bad.txt");
        split << "seq0 not_a_number\n";
    }
    CHECK_THROWS_WITH_AS(
        scan_triplets(dir.path().string(), (dir.path() / "bad.txt").string(), cfg),
        doctest::Contains("line 1"), std::runtime_error);

    CHECK_THROWS_AS(scan_triplets((dir.path() / "missing").string(), (dir.path() / "empty.txt").string(), cfg),
                    std::runtime_error);

    // static filter drops motionless triplets
    write_split((dir.path() / "all.txt").string(), "seq0", 0, 2);
    DatasetConfig strict;
    strict.static_filter = true;
    std::vector<std::string> warnings;
    CHECK(scan_triplets(dir.path().string(), (dir.path() / "all.txt").string(), strict, &warnings).empty());
    bool found_static_warning = false;
    for (const auto& w : warnings) {
        if (w.find("static") != std::string::npos) found_static_warning = true;
    }
    CHECK(found_static_warning);
}

TEST_CASE("augmentation: identity limits, flip semantics, determinism") {
    SyntheticScene scene = two_plane_scene();
    SyntheticData d = generate_synthetic(scene);
    TrainingTriplet triplet;
    triplet.prev = d.frames[0];
    triplet.center = d.frames[1];
    triplet.next = d.frames[2];
    triplet.intrinsics = d.intrinsics;

    AugmentationConfig off;
    off.flip_prob = 0;
    off.jitter_prob = 0;
    Rng rng(1);
    AugmentedPair pair = augment(triplet, off, rng);
    for (int64_t i = 0; i < triplet.center.numel(); ++i) {
        CHECK(pair.net_input.center[i] == triplet.center[i]);
        CHECK(pair.loss_target.center[i] == triplet.center[i]);
    }

    AugmentationConfig flip_only;
    flip_only.flip_prob = 1;
    flip_only.jitter_prob = 0;
    Rng rng2(2);
    AugmentedPair flipped = augment(triplet, flip_only, rng2);
    // both copies flipped, cx mirrored, double flip restores
    CHECK(flipped.loss_target.intrinsics.cx ==
          doctest::Approx(static_cast<double>(triplet.intrinsics.width) - 1.0 - triplet.intrinsics.cx));
    Tensor restored = flip_horizontal(flipped.loss_target.center);
    for (int64_t i = 0; i < restored.numel(); ++i) CHECK(restored[i] == triplet.center[i]);
    for (int64_t i = 0; i < restored.numel(); ++i) {
        CHECK(flipped.net_input.center[i] == flipped.loss_target.center[i]);
    }

    AugmentationConfig all;
    Rng rng3(7);
    Rng rng4(7);
    AugmentedPair p1 = augment(triplet, all, rng3);
    AugmentedPair p2 = augment(triplet, all, rng4);
    for (int64_t i = 0; i < p1.net_input.center.numel(); ++i) {
        CHECK(p1.net_input.center[i] == p2.net_input.center[i]);
    }
}

TEST_CASE("colour jitter touches only the network input") {
    SyntheticScene scene = two_plane_scene();
    SyntheticData d = generate_synthetic(scene);
    TrainingTriplet triplet;
    triplet.prev = d.frames[0];
    triplet.center = d.frames[1];
    triplet.next = d.frames[2];
    triplet.intrinsics = d.intrinsics;

    AugmentationConfig jitter;
    jitter.flip_prob = 0;
    jitter.jitter_prob = 1;
    Rng rng(11);
    AugmentedPair pair = augment(triplet, jitter, rng);
    for (int64_t i = 0; i < triplet.center.numel(); ++i) {
        CHECK(pair.loss_target.center[i] == triplet.center[i]);
    }
    double delta = 0;
    for (int64_t i = 0; i < triplet.center.numel(); ++i) {
        delta += std::fabs(pair.net_input.center[i] - triplet.center[i]);
    }
    CHECK(delta > 0.0);
}

TEST_CASE("augmentation applies identical parameters across the three frames") {
    Tensor same({3, 8, 8}, 0.4);
    TrainingTriplet triplet;
    triplet.prev = same;
    triplet.center = same;
    triplet.next = same;
    triplet.intrinsics.fx = 8;
    triplet.intrinsics.fy = 8;
    triplet.intrinsics.cx = 3.5;
    triplet.intrinsics.cy = 3.5;
    triplet.intrinsics.width = 8;
    triplet.intrinsics.height = 8;
    AugmentationConfig cfg;
    Rng rng(13);
    AugmentedPair pair = augment(triplet, cfg, rng);
    for (int64_t i = 0; i < same.numel(); ++i) {
        CHECK(pair.net_input.prev[i] == pair.net_input.center[i]);
        CHECK(pair.net_input.center[i] == pair.net_input.next[i]);
    }
}

TEST_CASE("brightness convention: multiplicative with clamping") {
    Tensor half({3, 2, 2}, 0.5);
    Tensor brighter = adjust_brightness(half, 1.2);
    for (int64_t i = 0; i < brighter.numel(); ++i) CHECK(brighter[i] == doctest::Approx(0.6).epsilon(1e-12));
    Tensor bright = adjust_brightness(Tensor({3, 1, 1}, 0.9), 1.2);
    CHECK(bright[0] == doctest::Approx(1.0)); // clamped
}

TEST_CASE("image io: 8-bit, 16-bit and f32 round trips") {
    TempDir dir("io");
    Rng rng(3);
    Tensor img = sadepth::testing::random_tensor({3, 6, 8}, rng, 0, 1);
    const std::string p8 = (dir.path() / "img.png").string();
    sadepth::io::save_image_u8(p8, img);
    Tensor back = sadepth::io::load_image(p8);
    REQUIRE(back.shape() == img.shape());
    for (int64_t i = 0; i < img.numel(); ++i) CHECK(std::fabs(back[i] - img[i]) <= 0.5 / 255.0 + 1e-12);

    Tensor map({1, 4, 5});
    for (int64_t i = 0; i < map.numel(); ++i) map[i] = 0.001 * static_cast<double>(i);
    const std::string p16 = (dir.path() / "map.png").string();
    sadepth::io::save_gray16(p16, map, 65535.0 / 0.02);
    Tensor b16 = sadepth::io::load_gray16(p16, 65535.0 / 0.02);
    for (int64_t i = 0; i < map.numel(); ++i) CHECK(std::fabs(b16[i] - map[i]) <= 0.02 / 65535.0 + 1e-12);

    const std::string pf = (dir.path() / "map.f32").string();
    sadepth::io::save_f32(pf, map);
    Tensor bf = sadepth::io::load_f32(pf, 4, 5);
    for (int64_t i = 0; i < map.numel(); ++i) CHECK(std::fabs(bf[i] - map[i]) < 1e-7);
}
