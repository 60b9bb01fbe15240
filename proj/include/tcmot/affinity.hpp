#pragma once

#include "tcmot/config.hpp"
#include "tcmot/core.hpp"
#include "tcmot/embed.hpp"
#include "tcmot/metric.hpp"

#include <Eigen/Core>

#include <array>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

namespace tcmot {

struct Velocities {
    Eigen::Vector2d forward = Eigen::Vector2d::Zero();   // fitted head -> tail
    Eigen::Vector2d backward = Eigen::Vector2d::Zero();  // fitted tail -> head
    bool degenerate = false;                             // fewer than two responses
};

/// Least-squares slope of box centres against frame index, in both directions.
Velocities tracklet_velocities(const Tracklet& t);

/// Product of two peak-1 Gaussian kernels on the forward and backward
/// extrapolation residuals. Requires tail(ti) < head(tj).
double motion_affinity(const Tracklet& ti, const Tracklet& tj, const std::array<double, 2>& sigma);

/// Embeddings of every response of every tracklet plus one probe per tracklet.
struct EmbeddedTracklets {
    std::vector<std::vector<Eigen::VectorXd>> responses;  // [tracklet][response]
    std::vector<Eigen::VectorXd> probes;                  // [tracklet]
};

EmbeddedTracklets embed_tracklets(std::span<const Tracklet> tracklets, const EmbeddingNet& net);

/// Per-segment probe membership: for each segment, tracklet positions whose head lies in it.
struct ProbeSet {
    std::vector<std::vector<int>> members;

    int size(int segment) const { return static_cast<int>(members.at(segment).size()); }
};

ProbeSet build_probe_set(std::span<const Tracklet> tracklets, int n_segments);

constexpr double kAppearanceEpsilon = 1e-12;
constexpr double kAppearanceCap = 1e12;

/// Normalized-distance appearance affinity between tracklets i and j, measured
/// under M0 + M_t against the probes of `segment`. The probes of i and j are
/// included in the normalizing sums even when they belong to another segment.
double appearance_affinity(int i, int j, const EmbeddedTracklets& emb, const ProbeSet& probes, int segment,
                           const MetricSet& ms);

struct AffinityMatrix {
    Eigen::MatrixXd p;       // thresholded, column-normalized linking scores
    Eigen::MatrixXd raw;     // motion * appearance before normalization (0 where infeasible)
    Eigen::MatrixXi gap;     // frame gap for feasible pairs, 0 elsewhere
    std::vector<int> tids;   // tracklet id of each row/column

    int size() const { return static_cast<int>(p.rows()); }
    bool feasible(int i, int j) const { return gap(i, j) > 0; }
};

/// Whether tj may directly follow ti.
bool temporally_feasible(const Tracklet& ti, const Tracklet& tj, int max_gap);

/// Scales each column of `raw` by its maximum (or sum) and zeroes entries below omega.
Eigen::MatrixXd normalize_and_threshold(const Eigen::MatrixXd& raw, double omega,
                                        ColumnNorm norm = ColumnNorm::Max);

/// Tracklets must carry their segment index.
AffinityMatrix build_affinity(std::span<const Tracklet> tracklets, const MetricSet& ms, const EmbeddingNet& net,
                              const Config& cfg);

/// CSV rows `row_tid,col_tid,value` for every nonzero entry of P.
void write_affinity_csv(std::ostream& os, const AffinityMatrix& a);

}  // namespace tcmot
