#pragma once

#include "tcmot/config.hpp"
#include "tcmot/core.hpp"
#include "tcmot/embed.hpp"
#include "tcmot/random.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace tcmot {

/// Common metric M0 plus one segment-wise metric per temporal segment.
/// Segment indices are 0-based throughout the library.
struct MetricSet {
    Eigen::MatrixXd m0;
    std::vector<Eigen::MatrixXd> per_segment;

    static MetricSet initial(int d_emb, int n_segments);

    int d_emb() const { return static_cast<int>(m0.rows()); }
    int n_segments() const { return static_cast<int>(per_segment.size()); }
    /// M0 + M_t
    Eigen::MatrixXd total(int t) const;

    bool operator==(const MetricSet& other) const;
};

struct TrainPair {
    Eigen::VectorXd x_i;
    Eigen::VectorXd x_j;
    int label = 1;  // +1 same object, -1 different
    int segment = 0;
};

double mahalanobis_sq(const Eigen::VectorXd& x_i, const Eigen::VectorXd& x_j, const Eigen::MatrixXd& m);

/// Hinge loss max(0, b - l (1 - d)) with d measured under M0 + M_t.
double pair_loss(const TrainPair& p, const MetricSet& ms, double margin_b);

/// Full multi-task objective with the temporal coupling between neighbouring segments.
double total_loss(std::span<const TrainPair> pairs, const MetricSet& ms, const Config& cfg);

/// d/dM0 of total_loss: lambda0 (M0 - I) + C sum l A [g > 0].
Eigen::MatrixXd grad_m0(std::span<const TrainPair> pairs, const MetricSet& ms, const Config& cfg);

/// Online gradient w.r.t. M_t. Pairs from other segments are ignored. The coupling
/// to M_{t+1} is left out because that metric does not exist yet when M_t is updated.
Eigen::MatrixXd grad_mt(int t, std::span<const TrainPair> pairs, const MetricSet& ms, const Config& cfg);

/// Nearest (Frobenius) positive semidefinite matrix. Symmetric PSD input is returned as is.
Eigen::MatrixXd psd_project(const Eigen::MatrixXd& m);

double min_eigenvalue(const Eigen::MatrixXd& m);

/// Reference into a tracklet list: tracklet position and response position within it.
struct ResponseRef {
    int tracklet = 0;
    int response = 0;
};

struct PairSample {
    ResponseRef a;
    ResponseRef b;
    int label = 1;
    int segment = 0;
};

struct PairCollection {
    std::vector<PairSample> pairs;
    int m = 0;                      // pairs drawn per polarity
    bool negative_deficit = false;  // no temporally overlapping tracklets were available
};

/// Positions (within the tracklet) of its `kappa` highest-confidence responses,
/// ties going to the earlier frame.
std::vector<int> strongest_responses(const Tracklet& t, int kappa);

/// Draws m positive pairs (two responses from one tracklet's strongest set) and m
/// negative pairs (strongest responses of two tracklets whose frame ranges overlap),
/// shuffled together. m is capped by the number of distinct candidates of each kind.
/// `tracklets` are the tracklets of one segment; refs index into that span.
PairCollection collect_pairs(std::span<const Tracklet> tracklets, int segment, int kappa, int m, Rng& rng);

std::vector<TrainPair> embed_pairs(const PairCollection& pc, std::span<const Tracklet> tracklets,
                                   const EmbeddingNet& net);

/// The per-pair update rule of the online learner, one segment at a time.
class OnlineMetricLearner {
public:
    enum class Step { Skipped, Negative, Positive };

    OnlineMetricLearner(int d_emb, int n_segments, const Config& cfg);

    /// Initializes M_t: zero for the first segment, a copy of M_{t-1} otherwise.
    void begin_segment(int t);
    /// Applies one pair to M0 and the current M_t.
    Step update(const Eigen::VectorXd& x_i, const Eigen::VectorXd& x_j, int label);
    /// Re-projects M0 and M_t onto the PSD cone; returns the largest Frobenius change.
    double end_segment();

    int current_segment() const { return t_; }
    const MetricSet& metrics() const { return ms_; }

private:
    Config cfg_;
    MetricSet ms_;
    int t_ = -1;
};

struct LearnStats {
    int pairs_seen = 0;
    int skipped = 0;
    int negative_updates = 0;
    int positive_updates = 0;
    int deficit_segments = 0;
    double max_reprojection_change = 0.0;
};

struct LearnResult {
    MetricSet metrics;
    EmbeddingNet net;
    LearnStats stats;
};

/// Trains the embedding with the single identity-metric loss for `cfg.warmup_epochs` epochs.
EmbeddingNet warm_up(std::span<const Tracklet> tracklets, EmbeddingNet net, const Config& cfg);

/// Online learning of M0..M_n with simultaneous fine-tuning of the embedding.
/// Each tracklet's `segment` field selects the segment it trains.
LearnResult learn_metrics(std::span<const Tracklet> tracklets, int n_segments, EmbeddingNet net, const Config& cfg);

void write_metrics(std::ostream& os, const MetricSet& ms);
MetricSet read_metrics(std::istream& is);
void save_metrics_file(const std::string& path, const MetricSet& ms);
MetricSet load_metrics_file(const std::string& path);

}  // namespace tcmot
