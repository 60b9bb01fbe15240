#include "tcmot/affinity.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <unordered_map>

namespace tcmot {
namespace {

Eigen::Vector2d fitted_slope(const Tracklet& t, bool reverse) {
    const int n = t.size();
    const double tail = t.last_frame();
    double mean_tau = 0.0;
    Eigen::Vector2d mean_c = Eigen::Vector2d::Zero();
    for (const auto& d : t.detections) {
        mean_tau += reverse ? tail - d.frame : d.frame;
        mean_c += d.box.center();
    }
    mean_tau /= n;
    mean_c /= n;
    double sxx = 0.0;
    Eigen::Vector2d sxy = Eigen::Vector2d::Zero();
    for (const auto& d : t.detections) {
        const double tau = (reverse ? tail - d.frame : d.frame) - mean_tau;
        sxx += tau * tau;
        sxy += tau * (d.box.center() - mean_c);
    }
    return sxx > 0.0 ? Eigen::Vector2d(sxy / sxx) : Eigen::Vector2d::Zero();
}

double gaussian_kernel(const Eigen::Vector2d& e, const std::array<double, 2>& sigma) {
    return std::exp(-0.5 * (e.x() * e.x() / sigma[0] + e.y() * e.y() / sigma[1]));
}

double pair_affinity_from_distances(double d_ij, double d_ji) {
    return std::min(kAppearanceCap, 1.0 / (d_ij * d_ji + kAppearanceEpsilon));
}

// Ratio d / sqrt(norm_sq), with 0/0 taken as 0.
double normalized(double d, double norm_sq) { return norm_sq > 0.0 ? d / std::sqrt(norm_sq) : 0.0; }

// Fast path for build_affinity: distances are taken in the whitened space
// y = L^T x with M0 + M_s = L L^T, and the sum over the segment's probes is cached
// per (segment, tracklet, response).
class AppearanceModel {
public:
    AppearanceModel(const EmbeddedTracklets& emb, const ProbeSet& probes, const MetricSet& ms)
        : emb_(emb), probes_(probes), ms_(ms) {}

    double affinity(int i, int j, int s) {
        auto& seg = segment(s);
        const bool i_in = std::find(probes_.members[s].begin(), probes_.members[s].end(), i) != probes_.members[s].end();
        const bool j_in = std::find(probes_.members[s].begin(), probes_.members[s].end(), j) != probes_.members[s].end();
        const double d_ij = side(seg, s, i, j, i_in, j_in);
        const double d_ji = side(seg, s, j, i, j_in, i_in);
        return pair_affinity_from_distances(d_ij, d_ji);
    }

private:
    struct Segment {
        Eigen::MatrixXd lt;  // L^T
        std::unordered_map<int, std::vector<Eigen::VectorXd>> whitened;  // tracklet -> responses
        std::unordered_map<int, Eigen::VectorXd> whitened_probe;
        std::unordered_map<int, std::vector<double>> base_sum;  // tracklet -> per-response sum over members
    };

    Segment& segment(int s) {
        auto it = segments_.find(s);
        if (it != segments_.end()) return it->second;
        Segment seg;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ms_.total(s));
        const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        seg.lt = root.asDiagonal() * es.eigenvectors().transpose();
        return segments_.emplace(s, std::move(seg)).first->second;
    }

    const Eigen::VectorXd& probe(Segment& seg, int q) {
        auto it = seg.whitened_probe.find(q);
        if (it == seg.whitened_probe.end()) it = seg.whitened_probe.emplace(q, seg.lt * emb_.probes[q]).first;
        return it->second;
    }

    const std::vector<Eigen::VectorXd>& responses(Segment& seg, int i) {
        auto it = seg.whitened.find(i);
        if (it == seg.whitened.end()) {
            std::vector<Eigen::VectorXd> ys;
            for (const auto& x : emb_.responses[i]) ys.push_back(seg.lt * x);
            it = seg.whitened.emplace(i, std::move(ys)).first;
        }
        return it->second;
    }

    const std::vector<double>& base(Segment& seg, int s, int i) {
        auto it = seg.base_sum.find(i);
        if (it == seg.base_sum.end()) {
            const auto& ys = responses(seg, i);
            std::vector<double> sums(ys.size(), 0.0);
            for (int q : probes_.members[s]) {
                const auto& g = probe(seg, q);
                for (std::size_t k = 0; k < ys.size(); ++k) sums[k] += (ys[k] - g).squaredNorm();
            }
            it = seg.base_sum.emplace(i, std::move(sums)).first;
        }
        return it->second;
    }

    // Mean over responses of `a` of d(x_a^k, g_b) / norm_a^k.
    double side(Segment& seg, int s, int a, int b, bool a_in, bool b_in) {
        const auto& ys = responses(seg, a);
        const auto& sums = base(seg, s, a);
        const auto& g_b = probe(seg, b);
        const auto& g_a = probe(seg, a);
        double acc = 0.0;
        for (std::size_t k = 0; k < ys.size(); ++k) {
            const double d = (ys[k] - g_b).squaredNorm();
            double norm_sq = sums[k];
            if (!b_in) norm_sq += d;
            if (!a_in) norm_sq += (ys[k] - g_a).squaredNorm();
            acc += normalized(d, norm_sq);
        }
        return acc / static_cast<double>(ys.size());
    }

    const EmbeddedTracklets& emb_;
    const ProbeSet& probes_;
    const MetricSet& ms_;
    std::map<int, Segment> segments_;
};

}  // namespace

Velocities tracklet_velocities(const Tracklet& t) {
    Velocities v;
    if (t.size() < 2) {
        v.degenerate = true;
        return v;
    }
    v.forward = fitted_slope(t, false);
    v.backward = fitted_slope(t, true);
    return v;
}

double motion_affinity(const Tracklet& ti, const Tracklet& tj, const std::array<double, 2>& sigma) {
    if (ti.last_frame() >= tj.first_frame()) {
        throw InputError("motion_affinity: tracklet " + std::to_string(tj.tid) + " does not start after tracklet " +
                         std::to_string(ti.tid) + " ends");
    }
    const double dt = tj.first_frame() - ti.last_frame();
    const Eigen::Vector2d p_tail = ti.tail().box.center();
    const Eigen::Vector2d p_head = tj.head().box.center();
    const Eigen::Vector2d fwd = p_tail + tracklet_velocities(ti).forward * dt - p_head;
    const Eigen::Vector2d bwd = p_head + tracklet_velocities(tj).backward * dt - p_tail;
    return gaussian_kernel(fwd, sigma) * gaussian_kernel(bwd, sigma);
}

EmbeddedTracklets embed_tracklets(std::span<const Tracklet> tracklets, const EmbeddingNet& net) {
    EmbeddedTracklets out;
    for (const auto& t : tracklets) {
        std::vector<Eigen::VectorXd> ys;
        ys.reserve(t.detections.size());
        for (const auto& d : t.detections) ys.push_back(net.embed(d.feature));
        out.probes.push_back(ys[strongest_responses(t, 1).front()]);
        out.responses.push_back(std::move(ys));
    }
    return out;
}

ProbeSet build_probe_set(std::span<const Tracklet> tracklets, int n_segments) {
    ProbeSet ps;
    ps.members.resize(n_segments);
    for (int i = 0; i < static_cast<int>(tracklets.size()); ++i) {
        const int s = tracklets[i].segment;
        if (s < 0 || s >= n_segments) throw InputError("tracklet segment outside the plan");
        ps.members[s].push_back(i);
    }
    return ps;
}

double appearance_affinity(int i, int j, const EmbeddedTracklets& emb, const ProbeSet& probes, int segment,
                           const MetricSet& ms) {
    if (segment < 0 || segment >= static_cast<int>(probes.members.size())) {
        throw InputError("appearance_affinity: segment out of range");
    }
    std::vector<int> set = probes.members[segment];
    if (set.empty()) throw InputError("appearance_affinity: empty probe set");
    for (int extra : {i, j}) {
        if (std::find(set.begin(), set.end(), extra) == set.end()) set.push_back(extra);
    }
    const Eigen::MatrixXd m = ms.total(segment);

    auto side = [&](int a, int b) {
        double acc = 0.0;
        for (const auto& x : emb.responses[a]) {
            double norm_sq = 0.0;
            for (int q : set) norm_sq += mahalanobis_sq(x, emb.probes[q], m);
            acc += normalized(mahalanobis_sq(x, emb.probes[b], m), norm_sq);
        }
        return acc / static_cast<double>(emb.responses[a].size());
    };
    return pair_affinity_from_distances(side(i, j), side(j, i));
}

bool temporally_feasible(const Tracklet& ti, const Tracklet& tj, int max_gap) {
    const int gap = tj.first_frame() - ti.last_frame();
    return gap > 0 && gap <= max_gap;
}

Eigen::MatrixXd normalize_and_threshold(const Eigen::MatrixXd& raw, double omega, ColumnNorm norm) {
    Eigen::MatrixXd p = raw;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
        const double scale = norm == ColumnNorm::Max ? p.col(j).maxCoeff() : p.col(j).sum();
        if (scale > 0.0) p.col(j) /= scale;
    }
    return (p.array() >= omega).select(p, 0.0);
}

AffinityMatrix build_affinity(std::span<const Tracklet> tracklets, const MetricSet& ms, const EmbeddingNet& net,
                              const Config& cfg) {
    const int n = static_cast<int>(tracklets.size());
    AffinityMatrix a;
    a.raw = Eigen::MatrixXd::Zero(n, n);
    a.gap = Eigen::MatrixXi::Zero(n, n);
    for (const auto& t : tracklets) a.tids.push_back(t.tid);
    if (n == 0) {
        a.p = a.raw;
        return a;
    }

    const auto emb = embed_tracklets(tracklets, net);
    const auto probes = build_probe_set(tracklets, ms.n_segments());
    AppearanceModel appearance(emb, probes, ms);
    const int max_gap = cfg.effective_max_gap();

    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            if (i == j || !temporally_feasible(tracklets[i], tracklets[j], max_gap)) continue;
            const double pm = motion_affinity(tracklets[i], tracklets[j], cfg.sigma_motion);
            if (pm < cfg.motion_gate) continue;
            a.gap(i, j) = tracklets[j].first_frame() - tracklets[i].last_frame();
            const double pa = appearance.affinity(i, j, tracklets[j].segment);
            a.raw(i, j) = pm * pa;
        }
    }
    a.p = normalize_and_threshold(a.raw, cfg.omega, cfg.column_norm);
    return a;
}

void write_affinity_csv(std::ostream& os, const AffinityMatrix& a) {
    os << std::setprecision(17);
    for (int i = 0; i < a.size(); ++i) {
        for (int j = 0; j < a.size(); ++j) {
            if (a.p(i, j) != 0.0) os << a.tids[i] << ',' << a.tids[j] << ',' << a.p(i, j) << '\n';
        }
    }
}

}  // namespace tcmot
