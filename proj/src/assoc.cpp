#include "tcmot/assoc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace tcmot {

Eigen::MatrixXi AssignmentSolution::matrix() const {
    Eigen::MatrixXi x = Eigen::MatrixXi::Zero(size(), size());
    for (int i = 0; i < size(); ++i) {
        if (successor[i] >= 0) x(i, successor[i]) = 1;
    }
    return x;
}

std::vector<int> AssignmentSolution::predecessors() const {
    std::vector<int> pred(successor.size(), -1);
    for (int i = 0; i < size(); ++i) {
        if (successor[i] >= 0) pred[successor[i]] = i;
    }
    return pred;
}

AssignmentSolution make_solution(const Eigen::MatrixXd& p, std::vector<int> successor) {
    const int n = static_cast<int>(successor.size());
    AssignmentSolution sol;
    std::vector<int> pred(n, -1);
    for (int i = 0; i < n; ++i) {
        const int j = successor[i];
        if (j < 0) continue;
        if (j >= n || pred[j] != -1) throw ConsistencyError("assignment uses a column twice");
        pred[j] = i;
        sol.objective += p(i, j);
    }
    std::vector<bool> seen(n, false);
    for (int i = 0; i < n; ++i) {
        if (pred[i] != -1) continue;
        std::vector<int> chain;
        for (int k = i; k != -1; k = successor[k]) {
            seen[k] = true;
            chain.push_back(k);
        }
        sol.chains.push_back(std::move(chain));
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
        throw ConsistencyError("assignment contains a cycle");
    }
    sol.successor = std::move(successor);
    return sol;
}

bool satisfies_constraints(const AssignmentSolution& sol, const Eigen::MatrixXd& p) {
    const Eigen::MatrixXi x = sol.matrix();
    if (x.rows() != p.rows()) return false;
    for (int k = 0; k < x.rows(); ++k) {
        if (x.row(k).sum() > 1 || x.col(k).sum() > 1) return false;
    }
    for (int i = 0; i < x.rows(); ++i) {
        for (int j = 0; j < x.cols(); ++j) {
            if (x(i, j) == 1 && !(p(i, j) > 0.0)) return false;
        }
    }
    return true;
}

namespace {

struct Entry {
    int i;
    int j;
    double p;
    double q = 0.0;
};

}  // namespace

AssignmentSolution softassign(const Eigen::MatrixXd& p, const SoftassignConfig& cfg) {
    const int n = static_cast<int>(p.rows());
    if (p.cols() != n) throw InputError("softassign: matrix is not square");
    if (!p.allFinite()) throw InputError("softassign: non-finite affinity");
    if ((p.array() < 0.0).any()) throw InputError("softassign: negative affinity");

    // Only positive scores can enter a solution; everything else is a forbidden cell.
    std::vector<Entry> entries;
    double pmax = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i != j && p(i, j) > 0.0) {
                entries.push_back({i, j, p(i, j)});
                pmax = std::max(pmax, p(i, j));
            }
        }
    }
    std::vector<int> successor(n, -1);
    if (entries.empty()) return make_solution(p, std::move(successor));

    std::vector<std::vector<int>> by_row(n), by_col(n);
    for (int e = 0; e < static_cast<int>(entries.size()); ++e) {
        by_row[entries[e].i].push_back(e);
        by_col[entries[e].j].push_back(e);
    }

    // Scores are rescaled to [0, 1]; the slack cells score 0. Sinkhorn runs in the log
    // domain on dual potentials f (rows) and g (columns), q_ij = exp(beta (s_ij - f_i - g_j)),
    // and the potentials carry over between temperatures so that late, sharp stages start
    // close to their fixed point.
    for (auto& e : entries) e.q = e.p / pmax;
    std::vector<double> f(n, 0.0), g(n, 0.0);
    std::vector<double> terms;
    auto log_sum_exp = [&terms] {
        const double top = *std::max_element(terms.begin(), terms.end());
        double s = 0.0;
        for (double t : terms) s += std::exp(t - top);
        return top + std::log(s);
    };
    double beta = cfg.beta0;
    for (;;) {
        for (int it = 0; it < cfg.sinkhorn_iters; ++it) {
            for (int i = 0; i < n; ++i) {
                terms.assign(1, 0.0);
                for (int e : by_row[i]) terms.push_back(beta * (entries[e].q - g[entries[e].j]));
                f[i] = log_sum_exp() / beta;
            }
            for (int j = 0; j < n; ++j) {
                terms.assign(1, 0.0);
                for (int e : by_col[j]) terms.push_back(beta * (entries[e].q - f[entries[e].i]));
                g[j] = log_sum_exp() / beta;
            }
            double worst = 0.0;
            for (int i = 0; i < n; ++i) {
                double s = std::exp(-beta * f[i]);
                for (int e : by_row[i]) s += std::exp(beta * (entries[e].q - f[i] - g[entries[e].j]));
                worst = std::max(worst, std::abs(s - 1.0));
            }
            if (worst < cfg.convergence_tol) break;
        }
        if (beta >= cfg.beta_max) break;
        beta = std::min(beta * cfg.beta_growth, cfg.beta_max);
    }
    for (auto& e : entries) e.q = std::exp(beta * (e.q - f[e.i] - g[e.j]));

    std::vector<bool> row_used(n, false), col_used(n, false);
    auto take = [&](std::vector<const Entry*>& list) {
        for (const Entry* e : list) {
            if (row_used[e->i] || col_used[e->j]) continue;
            successor[e->i] = e->j;
            row_used[e->i] = true;
            col_used[e->j] = true;
        }
    };

    std::vector<const Entry*> accepted, rest;
    for (const auto& e : entries) (e.q > cfg.binarize_threshold ? accepted : rest).push_back(&e);
    std::sort(accepted.begin(), accepted.end(), [](const Entry* a, const Entry* b) {
        return std::tie(b->p, a->i, a->j) < std::tie(a->p, b->i, b->j);
    });
    take(accepted);
    // Any positive cell on a free row and column still raises the objective.
    std::sort(rest.begin(), rest.end(), [](const Entry* a, const Entry* b) {
        return std::tie(b->q, b->p, a->i, a->j) < std::tie(a->q, a->p, b->i, b->j);
    });
    take(rest);
    return make_solution(p, std::move(successor));
}

namespace {

struct BruteForce {
    const Eigen::MatrixXd& p;
    int n;
    std::vector<double> row_best_suffix;
    std::vector<bool> col_used;
    std::vector<int> current;
    std::vector<int> best;
    double best_value = -1.0;

    void search(int row, double value) {
        if (value + row_best_suffix[row] <= best_value) return;
        if (row == n) {
            best_value = value;
            best = current;
            return;
        }
        for (int j = 0; j < n; ++j) {
            if (j == row || col_used[j] || !(p(row, j) > 0.0)) continue;
            col_used[j] = true;
            current[row] = j;
            search(row + 1, value + p(row, j));
            current[row] = -1;
            col_used[j] = false;
        }
        search(row + 1, value);
    }
};

}  // namespace

AssignmentSolution brute_force_gla(const Eigen::MatrixXd& p) {
    const int n = static_cast<int>(p.rows());
    if (p.cols() != n) throw InputError("brute_force_gla: matrix is not square");
    if (n > 10) throw InputError("brute_force_gla: N = " + std::to_string(n) + " exceeds 10");
    BruteForce bf{p, n, std::vector<double>(n + 1, 0.0), std::vector<bool>(n, false), std::vector<int>(n, -1), {}, -1.0};
    for (int i = n - 1; i >= 0; --i) {
        double best = 0.0;
        for (int j = 0; j < n; ++j)
            if (j != i) best = std::max(best, p(i, j));
        bf.row_best_suffix[i] = bf.row_best_suffix[i + 1] + best;
    }
    // Seed with the empty assignment so that ties keep the sparser solution.
    bf.best = std::vector<int>(n, -1);
    bf.best_value = 0.0;
    bf.search(0, 0.0);
    return make_solution(p, bf.best);
}

std::vector<Trajectory> merge_tracklets(std::span<const Tracklet> tracklets, const AssignmentSolution& sol) {
    if (static_cast<int>(tracklets.size()) != sol.size()) {
        throw ConsistencyError("assignment size does not match tracklet count");
    }
    std::vector<const std::vector<int>*> chains;
    for (const auto& c : sol.chains) chains.push_back(&c);
    std::stable_sort(chains.begin(), chains.end(), [&](const auto* a, const auto* b) {
        return std::make_pair(tracklets[a->front()].first_frame(), tracklets[a->front()].tid) <
               std::make_pair(tracklets[b->front()].first_frame(), tracklets[b->front()].tid);
    });

    std::vector<Trajectory> out;
    for (const auto* chain : chains) {
        Trajectory traj;
        traj.track_id = static_cast<int>(out.size()) + 1;
        for (int k : *chain) {
            const auto& t = tracklets[k];
            if (!traj.entries.empty() && t.first_frame() <= traj.entries.back().frame) {
                throw ConsistencyError("merged tracklet " + std::to_string(t.tid) + " overlaps its predecessor");
            }
            traj.source_tracklets.push_back(t.tid);
            for (const auto& d : t.detections) traj.entries.push_back({d.frame, d.box});
        }
        out.push_back(std::move(traj));
    }
    return out;
}

Trajectory interpolate_gaps(const Trajectory& traj) {
    Trajectory out;
    out.track_id = traj.track_id;
    out.source_tracklets = traj.source_tracklets;
    for (std::size_t k = 0; k < traj.entries.size(); ++k) {
        if (k > 0) {
            const auto& a = traj.entries[k - 1];
            const auto& b = traj.entries[k];
            const int span = b.frame - a.frame;
            for (int f = 1; f < span; ++f) {
                const double alpha = static_cast<double>(f) / span;
                const double w = a.box.width + alpha * (b.box.width - a.box.width);
                const double h = a.box.height + alpha * (b.box.height - a.box.height);
                const double cx = a.box.cx() + alpha * (b.box.cx() - a.box.cx());
                const double cy = a.box.cy() + alpha * (b.box.cy() - a.box.cy());
                out.entries.push_back({a.frame + f, Box::from_center(cx, cy, w, h)});
            }
        }
        out.entries.push_back(traj.entries[k]);
    }
    return out;
}

}  // namespace tcmot
