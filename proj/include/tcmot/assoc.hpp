#pragma once

#include "tcmot/config.hpp"
#include "tcmot/core.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace tcmot {

/// A partial one-to-one predecessor/successor assignment over N tracklets.
struct AssignmentSolution {
    std::vector<int> successor;    // successor[i] = j when X_ij = 1, else -1
    double objective = 0.0;        // sum of P_ij over the chosen links
    std::vector<std::vector<int>> chains;  // row/column indices, predecessor first

    int size() const { return static_cast<int>(successor.size()); }
    Eigen::MatrixXi matrix() const;
    std::vector<int> predecessors() const;
};

/// Builds successor-derived fields (objective, chains). Throws ConsistencyError on
/// a doubly used column or a cycle.
AssignmentSolution make_solution(const Eigen::MatrixXd& p, std::vector<int> successor);

/// True iff every row and column holds at most one link and every link has P > 0.
bool satisfies_constraints(const AssignmentSolution& sol, const Eigen::MatrixXd& p);

/// Deterministic-annealing softassign with a slack row and column, followed by
/// thresholding, greedy conflict resolution, and greedy completion.
AssignmentSolution softassign(const Eigen::MatrixXd& p, const SoftassignConfig& cfg);

/// Exact maximizer by branch-and-bound enumeration; N <= 10.
AssignmentSolution brute_force_gla(const Eigen::MatrixXd& p);

/// One trajectory per chain, in order of first frame. `tracklets[k]` corresponds
/// to row/column k of the solution. Track ids start at 1.
std::vector<Trajectory> merge_tracklets(std::span<const Tracklet> tracklets, const AssignmentSolution& sol);

/// Fills frame gaps by linear interpolation of box centre and size.
Trajectory interpolate_gaps(const Trajectory& traj);

}  // namespace tcmot
