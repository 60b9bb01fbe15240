#pragma once

#include "tcmot/affinity.hpp"
#include "tcmot/assoc.hpp"
#include "tcmot/config.hpp"
#include "tcmot/core.hpp"
#include "tcmot/embed.hpp"
#include "tcmot/metric.hpp"

#include <optional>
#include <span>
#include <vector>

namespace tcmot {

/// Every intermediate artifact of one tracking run.
struct PipelineResult {
    std::vector<Tracklet> tracklets;
    SegmentPlan plan;
    MetricSet metrics;
    EmbeddingNet net;
    LearnStats stats;
    AffinityMatrix affinity;
    AssignmentSolution assignment;
    std::vector<Trajectory> trajectories;
};

/// Default embedding for a config: d_in -> d_hidden -> d_emb (no hidden layer if d_hidden <= 0).
EmbeddingNet default_net(const Config& cfg);

/// Sets each tracklet's segment to the one containing its head frame.
void assign_segments(std::vector<Tracklet>& tracklets, const SegmentPlan& plan);

/// Tracklet generation, learning, affinity, association, merge, interpolation.
/// Errors are rethrown with the failing stage prefixed to the message.
PipelineResult run_pipeline(std::span<const Detection> dets, const Config& cfg,
                            std::optional<EmbeddingNet> net = std::nullopt);

/// Remaining stages for tracklets that already carry their segment index.
PipelineResult associate(std::vector<Tracklet> tracklets, const SegmentPlan& plan, const MetricSet& ms,
                         const EmbeddingNet& net, const Config& cfg);

}  // namespace tcmot
