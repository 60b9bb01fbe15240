#include "tcmot/core.hpp"

#include <algorithm>
#include <cmath>

namespace tcmot {

double iou(const Box& a, const Box& b) {
    const double x0 = std::max(a.left, b.left);
    const double y0 = std::max(a.top, b.top);
    const double x1 = std::min(a.left + a.width, b.left + b.width);
    const double y1 = std::min(a.top + a.height, b.top + b.height);
    const double inter = std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0);
    const double uni = a.width * a.height + b.width * b.height - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

Detection::Detection(int frame_, Box box_, double confidence_, Eigen::VectorXd feature_)
    : frame(frame_), box(box_), confidence(confidence_), feature(std::move(feature_)) {
    if (frame < 1) {
        throw InputError("detection frame must be >= 1, got " + std::to_string(frame));
    }
    if (!(box.width > 0.0)) {
        throw InputError("detection width must be > 0");
    }
    if (!(box.height > 0.0)) {
        throw InputError("detection height must be > 0");
    }
}

std::optional<int> truth_identity(const Detection& det) { return det.id_hint_; }

void set_truth_identity(Detection& det, std::optional<int> id) { det.id_hint_ = id; }

void check_tracklet(const Tracklet& t) {
    if (t.detections.empty()) {
        throw ConsistencyError("tracklet " + std::to_string(t.tid) + " is empty");
    }
    const auto dim = t.detections.front().feature.size();
    for (std::size_t k = 1; k < t.detections.size(); ++k) {
        if (t.detections[k].frame != t.detections[k - 1].frame + 1) {
            throw ConsistencyError("tracklet " + std::to_string(t.tid) + " is not contiguous");
        }
        if (t.detections[k].feature.size() != dim) {
            throw ConsistencyError("tracklet " + std::to_string(t.tid) + " mixes feature sizes");
        }
    }
}

int SegmentPlan::segment_of(int frame) const {
    if (boundaries.empty()) {
        return 0;
    }
    const int idx = (std::max(frame, 1) - 1) / segment_length;
    return std::min(idx, n_segments() - 1);
}

SegmentPlan plan_segments(int last_frame, int segment_length) {
    if (last_frame < 1 || segment_length < 1) {
        throw InputError("plan_segments needs last_frame >= 1 and segment_length >= 1");
    }
    SegmentPlan plan;
    plan.segment_length = segment_length;
    for (int start = 1; start <= last_frame; start += segment_length) {
        plan.boundaries.emplace_back(start, std::min(last_frame, start + segment_length - 1));
    }
    return plan;
}

}  // namespace tcmot
