#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

namespace tcmot {

/// How each column of the affinity matrix is scaled before the omega threshold.
enum class ColumnNorm { Max, Sum };

/// Frame-to-frame linking used to build reliable tracklets.
struct TrackGenConfig {
    double theta_link = 0.3;    // minimum link affinity
    double theta_margin = 0.05; // best must beat the runner-up by this much
    double w_pos = 0.4;
    double w_size = 0.2;
    double w_app = 0.4;
    // Scales that turn raw differences into normalized ones.
    double pos_scale = 0.2;   // fraction of mean box height
    double size_scale = 0.2;  // fraction of mean box side
    double app_scale = 1.0;   // cosine distance
    int min_tracklet_len = 2;
};

struct SoftassignConfig {
    double beta0 = 1.0;
    double beta_max = 200.0;
    double beta_growth = 1.5;
    int sinkhorn_iters = 60;
    double convergence_tol = 1e-6;
    double binarize_threshold = 0.6;
};

struct Config {
    // Objective weights and step size of the metric learner.
    double lambda0 = 0.01;
    double lambda = 0.02;
    double eta = 0.02;
    double c_weight = 0.001;
    double margin_b = 0.5;
    double learning_rate_beta = 0.01;

    int kappa = 4;
    std::array<double, 2> sigma_motion{625.0, 3600.0};
    double omega = 0.5;
    ColumnNorm column_norm = ColumnNorm::Max;
    int segment_length = 60;
    int max_gap = 0;  // 0 selects 2 * segment_length
    double motion_gate = 1e-3;  // pairs with a smaller motion kernel are infeasible

    int d_in = 16;
    int d_hidden = 128;
    int d_emb = 64;

    int pairs_per_segment = 64;  // upper bound on m
    int metric_epochs = 1;
    int finetune_epochs = 3;
    int batch_size = 16;
    int warmup_epochs = 0;
    bool use_segment_metrics = true;  // false pins every M_t to zero

    TrackGenConfig trackgen;
    SoftassignConfig solver;

    std::uint64_t rng_seed = 1;

    int effective_max_gap() const { return max_gap > 0 ? max_gap : 2 * segment_length; }
};

/// Returns `cfg` unchanged or throws InputError naming the first violated field.
Config validate_config(const Config& cfg);

/// Flat `key=value` form, one field per line; `#` starts a comment.
std::map<std::string, std::string> config_to_map(const Config& cfg);
/// Applies the given keys on top of `base`. Unknown keys are an InputError.
Config apply_config_values(Config base, const std::map<std::string, std::string>& values);

void write_config(std::ostream& os, const Config& cfg);
Config read_config(std::istream& is, const Config& base = {});
Config load_config_file(const std::string& path, const Config& base = {});
void save_config_file(const std::string& path, const Config& cfg);

}  // namespace tcmot
