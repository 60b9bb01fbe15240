#pragma once

#include "tcmot/core.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tcmot {

struct FrameMatch {
    int gt = 0;    // index into the frame's ground-truth boxes
    int pred = 0;  // index into the frame's predicted boxes
    double overlap = 0.0;
};

/// Maximum-total-overlap one-to-one matching restricted to pairs with IoU >= threshold.
/// Pairs in `keep` (index pairs from the previous frame's correspondences) are
/// retained first whenever they still clear the threshold.
std::vector<FrameMatch> match_frame(std::span<const Box> gt, std::span<const Box> pred, double iou_threshold,
                                    std::span<const std::pair<int, int>> keep = {});

/// Maximum-weight assignment over a rectangular weight matrix (Kuhn-Munkres).
/// Returns the column for each row, or -1. Zero-weight pairs are left unassigned.
std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weight);

struct EvalReport {
    double mota = 0.0;
    double motp = 0.0;
    double recall = 0.0;
    double precision = 0.0;
    double faf = 0.0;  // false alarms per frame
    int fp = 0;
    int fn = 0;
    int ids = 0;
    int frag = 0;
    int gt = 0;  // ground-truth trajectories
    int mt = 0;
    int pt = 0;
    int ml = 0;
    int gt_detections = 0;
    int matches = 0;
    int frames = 0;
};

EvalReport evaluate(std::span<const Trajectory> gt, std::span<const Trajectory> pred, double iou_threshold = 0.5);

void write_report_json(std::ostream& os, const EvalReport& r);
void write_report_table(std::ostream& os, const EvalReport& r);

}  // namespace tcmot
