#include "tcmot/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>

namespace tcmot {

std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weight) {
    const int rows = static_cast<int>(weight.size());
    const int cols = rows ? static_cast<int>(weight.front().size()) : 0;
    const int n = std::max(rows, cols);
    std::vector<int> result(rows, -1);
    if (n == 0) return result;

    // Shortest augmenting path with potentials, 1-based, on cost = -weight padded to n x n.
    auto cost = [&](int i, int j) -> double {
        return (i < rows && j < cols) ? -weight[i][j] : 0.0;
    };
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    for (int j = 1; j <= n; ++j) {
        const int i = p[j] - 1;
        if (i >= 0 && i < rows && j - 1 < cols && weight[i][j - 1] > 0.0) result[i] = j - 1;
    }
    return result;
}

std::vector<FrameMatch> match_frame(std::span<const Box> gt, std::span<const Box> pred, double iou_threshold,
                                    std::span<const std::pair<int, int>> keep) {
    std::vector<FrameMatch> out;
    std::vector<bool> gt_used(gt.size(), false), pred_used(pred.size(), false);
    for (const auto& [g, h] : keep) {
        if (g < 0 || h < 0 || g >= static_cast<int>(gt.size()) || h >= static_cast<int>(pred.size())) continue;
        if (gt_used[g] || pred_used[h]) continue;
        const double o = iou(gt[g], pred[h]);
        if (o >= iou_threshold) {
            out.push_back({g, h, o});
            gt_used[g] = pred_used[h] = true;
        }
    }

    std::vector<int> gi, hi;
    for (int g = 0; g < static_cast<int>(gt.size()); ++g) if (!gt_used[g]) gi.push_back(g);
    for (int h = 0; h < static_cast<int>(pred.size()); ++h) if (!pred_used[h]) hi.push_back(h);
    std::vector<std::vector<double>> w(gi.size(), std::vector<double>(hi.size(), 0.0));
    for (std::size_t a = 0; a < gi.size(); ++a) {
        for (std::size_t b = 0; b < hi.size(); ++b) {
            const double o = iou(gt[gi[a]], pred[hi[b]]);
            if (o >= iou_threshold) w[a][b] = o;
        }
    }
    const auto assign = max_weight_assignment(w);
    for (std::size_t a = 0; a < gi.size(); ++a) {
        if (assign[a] >= 0) out.push_back({gi[a], hi[assign[a]], w[a][assign[a]]});
    }
    std::sort(out.begin(), out.end(), [](const FrameMatch& x, const FrameMatch& y) { return x.gt < y.gt; });
    return out;
}

namespace {

struct FrameItems {
    std::vector<Box> boxes;
    std::vector<int> ids;  // trajectory position
};

}  // namespace

EvalReport evaluate(std::span<const Trajectory> gt, std::span<const Trajectory> pred, double iou_threshold) {
    std::map<int, FrameItems> gt_frames, pred_frames;
    std::vector<int> gt_len(gt.size(), 0);
    for (int k = 0; k < static_cast<int>(gt.size()); ++k) {
        for (const auto& e : gt[k].entries) {
            gt_frames[e.frame].boxes.push_back(e.box);
            gt_frames[e.frame].ids.push_back(k);
            ++gt_len[k];
        }
    }
    if (gt_frames.empty()) throw InputError("evaluate: ground truth is empty");
    for (int k = 0; k < static_cast<int>(pred.size()); ++k) {
        for (const auto& e : pred[k].entries) {
            pred_frames[e.frame].boxes.push_back(e.box);
            pred_frames[e.frame].ids.push_back(k);
        }
    }
    std::vector<int> frames;
    for (const auto& [f, _] : gt_frames) frames.push_back(f);
    for (const auto& [f, _] : pred_frames) frames.push_back(f);
    std::sort(frames.begin(), frames.end());
    frames.erase(std::unique(frames.begin(), frames.end()), frames.end());

    EvalReport r;
    r.gt = static_cast<int>(gt.size());
    r.frames = static_cast<int>(frames.size());
    std::vector<int> last_hyp(gt.size(), -1);    // last prediction ever matched
    std::vector<int> prev_hyp(gt.size(), -1);    // match in the previous frame
    std::vector<int> covered(gt.size(), 0);
    std::vector<bool> was_tracked(gt.size(), false), interrupted(gt.size(), false);
    double overlap_sum = 0.0;
    static const FrameItems kEmpty;

    for (int f : frames) {
        const auto git = gt_frames.find(f);
        const auto pit = pred_frames.find(f);
        const FrameItems& g = git == gt_frames.end() ? kEmpty : git->second;
        const FrameItems& h = pit == pred_frames.end() ? kEmpty : pit->second;

        std::vector<std::pair<int, int>> keep;
        for (int a = 0; a < static_cast<int>(g.ids.size()); ++a) {
            const int prev = prev_hyp[g.ids[a]];
            if (prev < 0) continue;
            const auto pos = std::find(h.ids.begin(), h.ids.end(), prev);
            if (pos != h.ids.end()) keep.emplace_back(a, static_cast<int>(pos - h.ids.begin()));
        }
        const auto matches = match_frame(g.boxes, h.boxes, iou_threshold, keep);

        std::vector<bool> gt_hit(g.ids.size(), false);
        for (const auto& m : matches) {
            const int gid = g.ids[m.gt];
            const int hid = h.ids[m.pred];
            gt_hit[m.gt] = true;
            if (last_hyp[gid] >= 0 && last_hyp[gid] != hid) ++r.ids;
            last_hyp[gid] = hid;
            ++covered[gid];
            overlap_sum += m.overlap;
        }
        for (int a = 0; a < static_cast<int>(g.ids.size()); ++a) {
            const int gid = g.ids[a];
            if (gt_hit[a]) {
                if (interrupted[gid]) ++r.frag;
                interrupted[gid] = false;
                was_tracked[gid] = true;
            } else {
                if (was_tracked[gid]) interrupted[gid] = true;
            }
        }
        std::fill(prev_hyp.begin(), prev_hyp.end(), -1);
        for (const auto& m : matches) prev_hyp[g.ids[m.gt]] = h.ids[m.pred];

        r.matches += static_cast<int>(matches.size());
        r.fn += static_cast<int>(g.ids.size() - matches.size());
        r.fp += static_cast<int>(h.ids.size() - matches.size());
        r.gt_detections += static_cast<int>(g.ids.size());
    }

    for (std::size_t k = 0; k < gt.size(); ++k) {
        const double cov = gt_len[k] ? static_cast<double>(covered[k]) / gt_len[k] : 0.0;
        if (cov >= 0.8) {
            ++r.mt;
        } else if (cov <= 0.2) {
            ++r.ml;
        } else {
            ++r.pt;
        }
    }
    r.mota = 1.0 - static_cast<double>(r.fp + r.fn + r.ids) / r.gt_detections;
    r.motp = r.matches ? overlap_sum / r.matches : 0.0;
    r.recall = static_cast<double>(r.matches) / r.gt_detections;
    r.precision = (r.matches + r.fp) ? static_cast<double>(r.matches) / (r.matches + r.fp) : 0.0;
    r.faf = r.frames ? static_cast<double>(r.fp) / r.frames : 0.0;
    return r;
}

void write_report_json(std::ostream& os, const EvalReport& r) {
    nlohmann::ordered_json j;
    j["mota"] = r.mota;
    j["motp"] = r.motp;
    j["recall"] = r.recall;
    j["precision"] = r.precision;
    j["faf"] = r.faf;
    j["fp"] = r.fp;
    j["fn"] = r.fn;
    j["ids"] = r.ids;
    j["frag"] = r.frag;
    j["gt"] = r.gt;
    j["mt"] = r.mt;
    j["pt"] = r.pt;
    j["ml"] = r.ml;
    os << j.dump(2) << '\n';
}

void write_report_table(std::ostream& os, const EvalReport& r) {
    os << std::left << std::setw(8) << "MOTA" << std::setw(8) << "MOTP" << std::setw(8) << "Recall"
       << std::setw(8) << "Prec" << std::setw(8) << "FAF" << std::setw(7) << "FP" << std::setw(7) << "FN"
       << std::setw(6) << "IDS" << std::setw(6) << "Frag" << std::setw(5) << "GT" << std::setw(5) << "MT"
       << std::setw(5) << "PT" << std::setw(5) << "ML" << '\n';
    os << std::fixed << std::setprecision(3) << std::setw(8) << r.mota << std::setw(8) << r.motp << std::setw(8)
       << r.recall << std::setw(8) << r.precision << std::setw(8) << r.faf << std::setw(7) << r.fp << std::setw(7)
       << r.fn << std::setw(6) << r.ids << std::setw(6) << r.frag << std::setw(5) << r.gt << std::setw(5) << r.mt
       << std::setw(5) << r.pt << std::setw(5) << r.ml << '\n';
    os.unsetf(std::ios::fixed);
}

}  // namespace tcmot
