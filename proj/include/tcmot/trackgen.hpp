#pragma once

#include "tcmot/config.hpp"
#include "tcmot/core.hpp"

#include <span>
#include <vector>

namespace tcmot {

/// Affinity in [0,1] between detections in consecutive frames; product of position,
/// size, and appearance terms computed on raw features.
double frame_affinity(const Detection& a, const Detection& b, const TrackGenConfig& cfg);

/// Dual-threshold linking. A link a->b is kept iff its affinity is >= theta_link and
/// exceeds the runner-up in both a's row and b's column by at least theta_margin.
/// Tracklet ids are assigned 0..n-1 in order of (first frame, first box left).
std::vector<Tracklet> generate_tracklets(std::span<const Detection> dets, const TrackGenConfig& cfg);

}  // namespace tcmot
