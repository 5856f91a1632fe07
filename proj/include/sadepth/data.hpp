#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "sadepth/geometry.hpp"
#include "sadepth/rng.hpp"
#include "sadepth/tensor.hpp"

namespace sadepth::data {

/// Frames I_{t-1}, I_t, I_{t+1} in [0,1] with shared intrinsics.
struct TrainingTriplet {
    Tensor prev, center, next; // (3,H,W) each
    geometry::Intrinsics intrinsics;
    std::string sequence;
    int64_t frame_index = 0;
};

struct AugmentationConfig {
    double flip_prob = 0.5;
    double jitter_prob = 0.5; // each colour jitter applies with this probability
    double contrast = 0.2;
    double saturation = 0.2;
    double hue = 0.1; // turns
    double brightness = 0.2;
};

/// net_input feeds the networks; loss_target keeps the original colours.
/// A sampled horizontal flip applies to both copies (and mirrors cx).
struct AugmentedPair {
    TrainingTriplet net_input;
    TrainingTriplet loss_target;
};

AugmentedPair augment(const TrainingTriplet& triplet, const AugmentationConfig& cfg, Rng& rng);

// Colour primitives shared with the augmentation tests.
Tensor flip_horizontal(const Tensor& image);
Tensor adjust_brightness(const Tensor& image, double factor);
Tensor adjust_contrast(const Tensor& image, double factor);
Tensor adjust_saturation(const Tensor& image, double factor);
Tensor adjust_hue(const Tensor& image, double delta_turns);

struct DatasetConfig {
    bool static_filter = true;
    double static_filter_threshold = 0.01; // mean abs difference between neighbours
};

/// One line of a split file: center frame of a candidate triplet.
struct TripletRecord {
    std::string sequence;
    int64_t frame_index = 0;
    std::array<std::string, 3> paths; // prev, center, next
    geometry::Intrinsics intrinsics;
};

/// Scans `root/<sequence>/<frame>.png` + `intrinsics.json` for the frames
/// named by the split file (one `<sequence> <frame_index>` pair per line).
/// Frames lacking a neighbour are skipped with a warning pushed to
/// `warnings`; static triplets are dropped when the filter is enabled.
std::vector<TripletRecord> scan_triplets(const std::string& root, const std::string& split_file,
                                         const DatasetConfig& cfg, std::vector<std::string>* warnings = nullptr);

TrainingTriplet load_triplet(const TripletRecord& record);

geometry::Intrinsics load_intrinsics(const std::string& path);
void save_intrinsics(const std::string& path, const geometry::Intrinsics& k);

// ---- synthetic scenes ----

struct PlaneSpec {
    double depth = 10.0;  // world z
    double x_min = -1e30; // world-x extent
    double x_max = 1e30;
    double y_min = -1e30; // world-y extent
    double y_max = 1e30;
    bool textured = true;           // false: constant colour
    std::array<double, 3> color = {0.5, 0.5, 0.5};
    double texture_scale = 1.0;     // spatial frequency multiplier
    uint64_t texture_seed = 0;
};

struct SyntheticScene {
    int64_t width = 96, height = 64;
    double focal = 80.0; // pixels; principal point at the image centre
    std::vector<PlaneSpec> planes;
    int64_t frame_count = 60;
    double baseline_x = 0.05; // camera x-step per frame (scene units)
    double start_x = 0.0;     // camera x at frame 0
    double noise_std = 0.0;
    uint64_t seed = 1;

    geometry::Intrinsics intrinsics() const;
    void validate() const;

    /// Three horizontal depth bands: textured near (bottom) and mid planes
    /// plus a textureless far backdrop. Bands are world-y slabs, so the
    /// x-translating camera keeps every region in view.
    static SyntheticScene banded_desk();
};

struct SyntheticData {
    std::vector<Tensor> frames;                        // (3,H,W)
    std::vector<Tensor> depths;                        // (1,H,W) camera-frame depth
    std::vector<geometry::RigidTransform> cam_to_world;
    geometry::Intrinsics intrinsics;

    /// T_{t->t'}: target camera coordinates into source camera coordinates.
    geometry::RigidTransform relative(int64_t t, int64_t t_prime) const;
};

/// Renders the textured plane stack through the camera path at 4x
/// supersampling, box-downsampled, with optional per-frame Gaussian noise.
SyntheticData generate_synthetic(const SyntheticScene& scene);

/// Emits the dataset layout: frames as PNG, depth/<frame>.f32, poses.json,
/// intrinsics.json under root/<sequence>/.
void write_dataset(const SyntheticData& d, const std::string& root, const std::string& sequence);

/// Writes a split file listing every frame of the sequence.
void write_split(const std::string& path, const std::string& sequence, int64_t first, int64_t last);

} // namespace sadepth::data
