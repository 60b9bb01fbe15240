#include "tcmot/synth.hpp"

#include "tcmot/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tcmot {
namespace {

// Folds an unbounded coordinate into [lo, hi] as if bouncing off both walls.
double reflect(double x, double lo, double hi) {
    const double span = hi - lo;
    if (span <= 0.0) return lo;
    double r = std::fmod(x - lo, 2.0 * span);
    if (r < 0.0) r += 2.0 * span;
    return lo + (r > span ? 2.0 * span - r : r);
}

Eigen::Vector2d heading(double angle, double speed) { return {speed * std::cos(angle), speed * std::sin(angle)}; }

}  // namespace

void validate_synth_config(const SynthConfig& cfg) {
    auto rate = [](const char* name, double v) {
        if (!(v >= 0.0 && v <= 1.0)) throw InputError(std::string(name) + " out of [0,1]");
    };
    rate("miss_rate", cfg.miss_rate);
    rate("turn_rate", cfg.turn_rate);
    if (!(cfg.miss_persistence >= 0.0 && cfg.miss_persistence < 1.0)) throw InputError("miss_persistence out of [0,1)");
    if (cfg.n_objects < 0 || cfg.n_frames < 1) throw InputError("n_objects must be >= 0 and n_frames >= 1");
    if (cfg.n_crossings < 0) throw InputError("n_crossings must be >= 0");
    if (!(cfg.arena_width > 0.0 && cfg.arena_height > 0.0)) throw InputError("arena size must be positive");
    if (!(cfg.min_width > 0.0 && cfg.max_width >= cfg.min_width && cfg.aspect > 0.0)) {
        throw InputError("box size range must be positive");
    }
    if (!(cfg.min_speed >= 0.0 && cfg.max_speed >= cfg.min_speed)) throw InputError("speed range is invalid");
    if (cfg.d_in < 1) throw InputError("d_in must be >= 1");
    if (cfg.sigma_pos < 0.0 || cfg.sigma_size < 0.0 || cfg.sigma_feat < 0.0 || cfg.feature_scale < 0.0) {
        throw InputError("noise levels must be >= 0");
    }
}

std::vector<Eigen::VectorXd> sample_features(const Eigen::VectorXd& mean, double sigma, int n, std::uint64_t seed) {
    Rng rng = make_stream(seed, "features");
    std::vector<Eigen::VectorXd> out;
    for (int k = 0; k < n; ++k) {
        Eigen::VectorXd f = mean;
        for (Eigen::Index d = 0; d < f.size(); ++d) f(d) += gaussian(rng, sigma);
        out.push_back(std::move(f));
    }
    return out;
}

SynthScene synth_scene(const SynthConfig& cfg) {
    validate_synth_config(cfg);
    Rng layout = make_stream(cfg.rng_seed, "synth-layout");
    Rng motion = make_stream(cfg.rng_seed, "synth-motion");
    Rng noise = make_stream(cfg.rng_seed, "synth-noise");
    const double two_pi = 2.0 * std::numbers::pi;

    SynthScene scene;
    const int n = cfg.n_objects;
    std::vector<double> width(n), height(n);
    std::vector<Eigen::Vector2d> start(n), velocity(n);
    std::vector<bool> crossing(n, false);

    for (int k = 0; k < n; ++k) {
        width[k] = cfg.min_width + (cfg.max_width - cfg.min_width) * uniform01(layout);
        height[k] = cfg.aspect * width[k];
        Eigen::VectorXd mu(cfg.d_in);
        for (int d = 0; d < cfg.d_in; ++d) mu(d) = gaussian(layout, cfg.feature_scale);
        scene.identity_means.push_back(std::move(mu));
        const double speed = cfg.min_speed + (cfg.max_speed - cfg.min_speed) * uniform01(layout);
        velocity[k] = heading(two_pi * uniform01(layout), speed);
        start[k] = {cfg.arena_width * uniform01(layout), cfg.arena_height * uniform01(layout)};
    }

    // Crossing pairs share a point at the scheduled frame and approach it from
    // directions at least 60 degrees apart.
    for (int c = 0; c < cfg.n_crossings && 2 * c + 1 < n; ++c) {
        const int a = 2 * c;
        const int b = 2 * c + 1;
        const int frame = std::max(1, cfg.n_frames * (c + 1) / (cfg.n_crossings + 1));
        scene.crossing_frames.push_back(frame);
        const Eigen::Vector2d meet{cfg.arena_width * (0.3 + 0.4 * uniform01(layout)),
                                   cfg.arena_height * (0.3 + 0.4 * uniform01(layout))};
        const double angle = two_pi * uniform01(layout);
        const double turn = std::numbers::pi / 3.0 + (std::numbers::pi / 3.0) * uniform01(layout);
        velocity[a] = heading(angle, velocity[a].norm());
        velocity[b] = heading(angle + turn, velocity[b].norm());
        start[a] = meet - velocity[a] * (frame - 1);
        start[b] = meet - velocity[b] * (frame - 1);
        crossing[a] = crossing[b] = true;
    }

    scene.ground_truth.resize(n);
    std::vector<Eigen::Vector2d> pos = start;
    for (int k = 0; k < n; ++k) scene.ground_truth[k].track_id = k + 1;

    // Two-state chain per object: P(miss | miss) = p + r(1-p), P(miss | hit) = p(1-r),
    // whose stationary miss probability is p for every r.
    const double p = cfg.miss_rate;
    const double r = cfg.miss_persistence;
    std::vector<bool> was_missed(n, false);
    for (int k = 0; k < n; ++k) was_missed[k] = uniform01(noise) < p;

    for (int f = 1; f <= cfg.n_frames; ++f) {
        for (int k = 0; k < n; ++k) {
            const double cx = reflect(pos[k].x(), 0.5 * width[k], cfg.arena_width - 0.5 * width[k]);
            const double cy = reflect(pos[k].y(), 0.5 * height[k], cfg.arena_height - 0.5 * height[k]);
            const Box truth = Box::from_center(cx, cy, width[k], height[k]);
            scene.ground_truth[k].entries.push_back({f, truth});

            const double p_miss = was_missed[k] ? p + r * (1.0 - p) : p * (1.0 - r);
            const bool missed = f == 1 ? was_missed[k] : uniform01(noise) < p_miss;
            was_missed[k] = missed;
            const double ex = gaussian(noise, cfg.sigma_pos);
            const double ey = gaussian(noise, cfg.sigma_pos);
            const double ew = gaussian(noise, cfg.sigma_size);
            const double eh = gaussian(noise, cfg.sigma_size);
            const double conf = 0.5 + 0.5 * uniform01(noise);
            Eigen::VectorXd feat = scene.identity_means[k];
            for (int d = 0; d < cfg.d_in; ++d) feat(d) += gaussian(noise, cfg.sigma_feat);
            if (missed) continue;

            const Box box = Box::from_center(cx + ex, cy + ey, std::max(1.0, width[k] + ew),
                                             std::max(1.0, height[k] + eh));
            Detection det(f, box, conf, std::move(feat));
            set_truth_identity(det, k + 1);
            scene.detections.push_back(std::move(det));
        }
        for (int k = 0; k < n; ++k) {
            if (!crossing[k] && cfg.turn_rate > 0.0 && uniform01(motion) < cfg.turn_rate) {
                const double delta = cfg.max_turn * (2.0 * uniform01(motion) - 1.0);
                const double c = std::cos(delta), s = std::sin(delta);
                velocity[k] = Eigen::Vector2d(c * velocity[k].x() - s * velocity[k].y(),
                                              s * velocity[k].x() + c * velocity[k].y());
            }
            pos[k] += velocity[k];
        }
    }
    return scene;
}

}  // namespace tcmot
