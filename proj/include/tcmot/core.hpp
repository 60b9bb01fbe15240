#pragma once

#include <Eigen/Core>

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tcmot {

/// Malformed or out-of-contract input (bad file row, invalid config value, ...).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A result that should be impossible if every module honours its contract.
class ConsistencyError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct Box {
    double left = 0.0;
    double top = 0.0;
    double width = 1.0;
    double height = 1.0;

    double cx() const { return left + 0.5 * width; }
    double cy() const { return top + 0.5 * height; }
    Eigen::Vector2d center() const { return {cx(), cy()}; }

    static Box from_center(double cx, double cy, double w, double h) {
        return {cx - 0.5 * w, cy - 0.5 * h, w, h};
    }
};

double iou(const Box& a, const Box& b);

/// One detector response.
///
/// The optional ground-truth identity is kept private; only the evaluation and
/// synthesis code reach it through the `truth` accessors below.
class Detection {
public:
    Detection() = default;
    Detection(int frame, Box box, double confidence, Eigen::VectorXd feature);

    int frame = 1;
    Box box;
    double confidence = 0.0;
    Eigen::VectorXd feature;

private:
    std::optional<int> id_hint_;

    friend std::optional<int> truth_identity(const Detection&);
    friend void set_truth_identity(Detection&, std::optional<int>);
};

/// Ground-truth identity attached by the loader or synthesizer. Tracker code never calls this.
std::optional<int> truth_identity(const Detection& det);
void set_truth_identity(Detection& det, std::optional<int> id);

/// Temporally contiguous run of detections believed to be one object.
struct Tracklet {
    int tid = 0;
    std::vector<Detection> detections;
    int segment = 0;

    const Detection& head() const { return detections.front(); }
    const Detection& tail() const { return detections.back(); }
    int first_frame() const { return head().frame; }
    int last_frame() const { return tail().frame; }
    int size() const { return static_cast<int>(detections.size()); }

    bool overlaps(const Tracklet& other) const {
        return first_frame() <= other.last_frame() && other.first_frame() <= last_frame();
    }
};

/// Throws ConsistencyError unless the tracklet is nonempty, contiguous, and of uniform feature size.
void check_tracklet(const Tracklet& t);

struct SegmentPlan {
    int segment_length = 1;
    std::vector<std::pair<int, int>> boundaries;  // inclusive frame ranges

    int n_segments() const { return static_cast<int>(boundaries.size()); }
    /// 0-based index of the segment containing `frame`; frames past the end map to the last segment.
    int segment_of(int frame) const;
};

SegmentPlan plan_segments(int last_frame, int segment_length);

struct TrajectoryEntry {
    int frame = 0;
    Box box;
};

struct Trajectory {
    int track_id = 0;
    std::vector<TrajectoryEntry> entries;
    std::vector<int> source_tracklets;
};

}  // namespace tcmot
