#include "tcmot/trackgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace tcmot {
namespace {

double cosine_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) {
        return (na == 0.0 && nb == 0.0) ? 0.0 : 1.0;
    }
    return 1.0 - a.dot(b) / (na * nb);
}

}  // namespace

double frame_affinity(const Detection& a, const Detection& b, const TrackGenConfig& cfg) {
    if (b.frame != a.frame + 1) {
        throw InputError("frame_affinity needs consecutive frames, got " + std::to_string(a.frame) +
                         " and " + std::to_string(b.frame));
    }
    const double mean_w = 0.5 * (a.box.width + b.box.width);
    const double mean_h = 0.5 * (a.box.height + b.box.height);

    const double dx = (a.box.cx() - b.box.cx()) / (cfg.pos_scale * mean_h);
    const double dy = (a.box.cy() - b.box.cy()) / (cfg.pos_scale * mean_h);
    const double pos = std::exp(-cfg.w_pos * (dx * dx + dy * dy));

    const double dw = (a.box.width - b.box.width) / (cfg.size_scale * mean_w);
    const double dh = (a.box.height - b.box.height) / (cfg.size_scale * mean_h);
    const double size = std::exp(-cfg.w_size * (dw * dw + dh * dh));

    const double app = std::exp(-cfg.w_app * cosine_distance(a.feature, b.feature) / cfg.app_scale);
    return pos * size * app;
}

std::vector<Tracklet> generate_tracklets(std::span<const Detection> dets, const TrackGenConfig& cfg) {
    // Group detection indices by frame, keeping input order inside a frame.
    std::map<int, std::vector<int>> by_frame;
    for (int i = 0; i < static_cast<int>(dets.size()); ++i) {
        by_frame[dets[i].frame].push_back(i);
    }

    std::vector<int> next(dets.size(), -1);
    std::vector<int> prev(dets.size(), -1);

    for (auto it = by_frame.begin(); it != by_frame.end(); ++it) {
        auto nit = std::next(it);
        if (nit == by_frame.end() || nit->first != it->first + 1) continue;
        const auto& rows = it->second;
        const auto& cols = nit->second;
        const auto nr = rows.size();
        const auto nc = cols.size();

        Eigen::MatrixXd aff(nr, nc);
        for (std::size_t r = 0; r < nr; ++r) {
            for (std::size_t c = 0; c < nc; ++c) {
                aff(r, c) = frame_affinity(dets[rows[r]], dets[cols[c]], cfg);
            }
        }

        for (std::size_t r = 0; r < nr; ++r) {
            for (std::size_t c = 0; c < nc; ++c) {
                const double v = aff(r, c);
                if (v < cfg.theta_link) continue;
                double runner_up = 0.0;
                for (std::size_t c2 = 0; c2 < nc; ++c2) {
                    if (c2 != c) runner_up = std::max(runner_up, aff(r, c2));
                }
                for (std::size_t r2 = 0; r2 < nr; ++r2) {
                    if (r2 != r) runner_up = std::max(runner_up, aff(r2, c));
                }
                // The occupancy check only matters for exact ties at theta_margin == 0.
                if (v - runner_up >= cfg.theta_margin && next[rows[r]] == -1 && prev[cols[c]] == -1) {
                    next[rows[r]] = cols[c];
                    prev[cols[c]] = rows[r];
                }
            }
        }
    }

    std::vector<Tracklet> out;
    for (const auto& [frame, idx] : by_frame) {
        for (int start : idx) {
            if (prev[start] != -1) continue;
            Tracklet t;
            for (int k = start; k != -1; k = next[k]) {
                t.detections.push_back(dets[k]);
            }
            if (t.size() < cfg.min_tracklet_len) continue;
            t.tid = static_cast<int>(out.size());
            out.push_back(std::move(t));
        }
    }
    return out;
}

}  // namespace tcmot
