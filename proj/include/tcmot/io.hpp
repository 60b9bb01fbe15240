#pragma once

#include "tcmot/core.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace tcmot {

/// Parses MOT-style rows `frame,id,left,top,width,height,conf[,...]`. Features come
/// from the sidecar stream, one whitespace-separated line per data row in the same
/// order. The id column (-1 for none) is kept only as ground-truth metadata.
std::vector<Detection> read_detections(std::istream& csv, std::istream* features);

/// Reads `path` and, if present, the sidecar `feature_path` (defaults to `path + ".feat"`).
std::vector<Detection> load_detections(const std::string& path, const std::string& feature_path = {});

void write_detections(std::ostream& csv, std::ostream& features, std::span<const Detection> dets);
void save_detections(const std::string& path, std::span<const Detection> dets, const std::string& feature_path = {});

/// Rows `frame,track_id,left,top,width,height,1,-1,-1,-1` sorted by frame, then track id.
void write_trajectories(std::ostream& os, std::span<const Trajectory> trajs);
void emit_trajectories(std::span<const Trajectory> trajs, const std::string& path);

/// Groups MOT-style rows by track id (ascending); entries sorted by frame.
std::vector<Trajectory> read_trajectories(std::istream& is);
std::vector<Trajectory> load_trajectories(const std::string& path);

/// One row per tracklet response: `frame,tid,left,top,width,height,conf`.
void write_tracklets(std::ostream& os, std::span<const Tracklet> tracklets);

}  // namespace tcmot
