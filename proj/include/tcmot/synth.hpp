#pragma once

#include "tcmot/core.hpp"

#include <cstdint>
#include <vector>

namespace tcmot {

/// Desk-scale multi-target scene: boxes move linearly (reflecting off the arena
/// walls, with occasional heading changes) and carry identity-coded features.
struct SynthConfig {
    int n_objects = 8;
    int n_frames = 600;
    double arena_width = 1920.0;
    double arena_height = 1080.0;
    double min_width = 40.0;
    double max_width = 60.0;
    double aspect = 2.5;  // height / width
    double min_speed = 1.0;
    double max_speed = 4.0;
    double turn_rate = 0.0;       // per-frame probability of a heading change
    double max_turn = 0.6;        // radians
    int n_crossings = 2;          // objects (2k, 2k+1) meet at a scheduled frame
    double sigma_pos = 1.0;
    double sigma_size = 1.0;
    double miss_rate = 0.1;        // stationary fraction of missed detections
    double miss_persistence = 0.9; // lag-1 correlation of misses (0 = independent frames)
    int d_in = 16;
    double feature_scale = 1.0;   // per-dimension std of the identity means
    double sigma_feat = 1.0;     // ~17% best-threshold pair error between identities
    std::uint64_t rng_seed = 1;
};

struct SynthScene {
    std::vector<Detection> detections;  // sorted by frame, then object
    std::vector<Trajectory> ground_truth;
    std::vector<Eigen::VectorXd> identity_means;
    std::vector<int> crossing_frames;
};

/// Throws InputError for rates outside [0,1] or non-positive sizes.
void validate_synth_config(const SynthConfig& cfg);

SynthScene synth_scene(const SynthConfig& cfg);

/// Samples `n` identity-coded feature vectors around `mean`.
std::vector<Eigen::VectorXd> sample_features(const Eigen::VectorXd& mean, double sigma, int n, std::uint64_t seed);

}  // namespace tcmot
