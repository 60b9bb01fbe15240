#include "tcmot/metric.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>

namespace tcmot {
namespace {

constexpr const char* kMetricMagic = "tcmot-metrics";
constexpr int kMetricVersion = 1;

Eigen::MatrixXd outer_diff(const Eigen::VectorXd& x_i, const Eigen::VectorXd& x_j) {
    const Eigen::VectorXd d = x_i - x_j;
    return d * d.transpose();
}

// C * sum l A over the pairs of segment `t` (all segments when t < 0) whose hinge is active.
Eigen::MatrixXd empirical_term(std::span<const TrainPair> pairs, const MetricSet& ms, const Config& cfg, int t) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(ms.d_emb(), ms.d_emb());
    for (const auto& p : pairs) {
        if (t >= 0 && p.segment != t) continue;
        if (hinge_argument(p.x_i, p.x_j, p.label, ms.total(p.segment), cfg.margin_b) > 0.0) {
            g += (cfg.c_weight * p.label) * outer_diff(p.x_i, p.x_j);
        }
    }
    return g;
}

void check_segment(const MetricSet& ms, int t) {
    if (t < 0 || t >= ms.n_segments()) {
        throw InputError("segment " + std::to_string(t) + " out of range [0," + std::to_string(ms.n_segments()) + ")");
    }
}

}  // namespace

MetricSet MetricSet::initial(int d_emb, int n_segments) {
    MetricSet ms;
    ms.m0 = Eigen::MatrixXd::Identity(d_emb, d_emb);
    ms.per_segment.assign(n_segments, Eigen::MatrixXd::Zero(d_emb, d_emb));
    return ms;
}

Eigen::MatrixXd MetricSet::total(int t) const {
    check_segment(*this, t);
    return m0 + per_segment[t];
}

bool MetricSet::operator==(const MetricSet& other) const {
    if (m0.rows() != other.m0.rows() || per_segment.size() != other.per_segment.size()) return false;
    if (m0 != other.m0) return false;
    for (std::size_t t = 0; t < per_segment.size(); ++t) {
        if (per_segment[t] != other.per_segment[t]) return false;
    }
    return true;
}

double mahalanobis_sq(const Eigen::VectorXd& x_i, const Eigen::VectorXd& x_j, const Eigen::MatrixXd& m) {
    if (x_i.size() != x_j.size() || m.rows() != x_i.size() || m.cols() != x_i.size()) {
        throw InputError("mahalanobis_sq: dimension mismatch");
    }
    const Eigen::VectorXd d = x_i - x_j;
    return d.dot(m * d);
}

double pair_loss(const TrainPair& p, const MetricSet& ms, double margin_b) {
    return std::max(0.0, margin_b - p.label * (1.0 - mahalanobis_sq(p.x_i, p.x_j, ms.total(p.segment))));
}

double total_loss(std::span<const TrainPair> pairs, const MetricSet& ms, const Config& cfg) {
    const auto eye = Eigen::MatrixXd::Identity(ms.d_emb(), ms.d_emb());
    double loss = 0.5 * cfg.lambda0 * (ms.m0 - eye).squaredNorm();
    for (int t = 0; t < ms.n_segments(); ++t) {
        if (t > 0) loss += 0.5 * cfg.eta * (ms.per_segment[t] - ms.per_segment[t - 1]).squaredNorm();
        loss += 0.5 * cfg.lambda * ms.per_segment[t].squaredNorm();
    }
    for (const auto& p : pairs) {
        check_segment(ms, p.segment);
        loss += cfg.c_weight * pair_loss(p, ms, cfg.margin_b);
    }
    return loss;
}

Eigen::MatrixXd grad_m0(std::span<const TrainPair> pairs, const MetricSet& ms, const Config& cfg) {
    const auto eye = Eigen::MatrixXd::Identity(ms.d_emb(), ms.d_emb());
    return cfg.lambda0 * (ms.m0 - eye) + empirical_term(pairs, ms, cfg, -1);
}

Eigen::MatrixXd grad_mt(int t, std::span<const TrainPair> pairs, const MetricSet& ms, const Config& cfg) {
    check_segment(ms, t);
    Eigen::MatrixXd g = cfg.lambda * ms.per_segment[t] + empirical_term(pairs, ms, cfg, t);
    if (t > 0) g += cfg.eta * (ms.per_segment[t] - ms.per_segment[t - 1]);
    return g;
}

Eigen::MatrixXd psd_project(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw InputError("psd_project: matrix is not square");
    if (!m.allFinite()) throw InputError("psd_project: non-finite entries");
    const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success) throw InputError("psd_project: eigensolver failed");
    if (sym.rows() == 0 || es.eigenvalues().minCoeff() >= 0.0) return sym;
    const Eigen::VectorXd clamped = es.eigenvalues().cwiseMax(0.0);
    const Eigen::MatrixXd out = es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
    if (m.rows() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

std::vector<int> strongest_responses(const Tracklet& t, int kappa) {
    std::vector<int> idx(t.detections.size());
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = static_cast<int>(k);
    // Responses are in frame order, so a stable sort breaks ties by earlier frame.
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        return t.detections[a].confidence > t.detections[b].confidence;
    });
    if (static_cast<int>(idx.size()) > kappa) idx.resize(kappa);
    return idx;
}

PairCollection collect_pairs(std::span<const Tracklet> tracklets, int segment, int kappa, int m, Rng& rng) {
    std::vector<std::vector<int>> strongest;
    for (const auto& t : tracklets) strongest.push_back(strongest_responses(t, kappa));

    std::vector<PairSample> positives;
    std::vector<PairSample> negatives;
    const int n = static_cast<int>(tracklets.size());
    for (int i = 0; i < n; ++i) {
        const auto& si = strongest[i];
        for (std::size_t a = 0; a < si.size(); ++a) {
            for (std::size_t b = a + 1; b < si.size(); ++b) {
                positives.push_back({{i, si[a]}, {i, si[b]}, +1, segment});
            }
        }
        for (int j = i + 1; j < n; ++j) {
            if (!tracklets[i].overlaps(tracklets[j])) continue;
            for (int ra : si) {
                for (int rb : strongest[j]) negatives.push_back({{i, ra}, {j, rb}, -1, segment});
            }
        }
    }

    PairCollection out;
    out.negative_deficit = negatives.empty();
    const auto avail_pos = static_cast<int>(positives.size());
    const auto avail_neg = static_cast<int>(negatives.size());
    out.m = out.negative_deficit ? std::min(m, avail_pos) : std::min({m, avail_pos, avail_neg});

    std::shuffle(positives.begin(), positives.end(), rng);
    std::shuffle(negatives.begin(), negatives.end(), rng);
    out.pairs.assign(positives.begin(), positives.begin() + out.m);
    if (!out.negative_deficit) out.pairs.insert(out.pairs.end(), negatives.begin(), negatives.begin() + out.m);
    std::shuffle(out.pairs.begin(), out.pairs.end(), rng);
    return out;
}

std::vector<TrainPair> embed_pairs(const PairCollection& pc, std::span<const Tracklet> tracklets,
                                   const EmbeddingNet& net) {
    std::vector<TrainPair> out;
    out.reserve(pc.pairs.size());
    for (const auto& s : pc.pairs) {
        const auto& da = tracklets[s.a.tracklet].detections[s.a.response];
        const auto& db = tracklets[s.b.tracklet].detections[s.b.response];
        out.push_back({net.embed(da.feature), net.embed(db.feature), s.label, s.segment});
    }
    return out;
}

OnlineMetricLearner::OnlineMetricLearner(int d_emb, int n_segments, const Config& cfg)
    : cfg_(cfg), ms_(MetricSet::initial(d_emb, n_segments)) {}

void OnlineMetricLearner::begin_segment(int t) {
    check_segment(ms_, t);
    if (t > 0 && cfg_.use_segment_metrics) ms_.per_segment[t] = ms_.per_segment[t - 1];
    t_ = t;
}

OnlineMetricLearner::Step OnlineMetricLearner::update(const Eigen::VectorXd& x_i, const Eigen::VectorXd& x_j,
                                                      int label) {
    if (t_ < 0) throw ConsistencyError("OnlineMetricLearner::update before begin_segment");
    const double dist = mahalanobis_sq(x_i, x_j, ms_.total(t_));
    if (label * (1.0 - dist) > cfg_.margin_b) return Step::Skipped;

    const TrainPair pair{x_i, x_j, label, t_};
    const std::span<const TrainPair> one(&pair, 1);
    const Eigen::MatrixXd g0 = grad_m0(one, ms_, cfg_);
    Eigen::MatrixXd m0 = ms_.m0 - cfg_.learning_rate_beta * g0;
    Eigen::MatrixXd mt = ms_.per_segment[t_];
    if (cfg_.use_segment_metrics) mt -= cfg_.learning_rate_beta * grad_mt(t_, one, ms_, cfg_);

    if (label < 0) {
        ms_.m0 = std::move(m0);
        ms_.per_segment[t_] = std::move(mt);
        return Step::Negative;
    }
    ms_.m0 = psd_project(m0);
    ms_.per_segment[t_] = psd_project(mt);
    return Step::Positive;
}

double OnlineMetricLearner::end_segment() {
    if (t_ < 0) return 0.0;
    const Eigen::MatrixXd m0 = psd_project(ms_.m0);
    const Eigen::MatrixXd mt = psd_project(ms_.per_segment[t_]);
    const double change = std::max((m0 - ms_.m0).norm(), (mt - ms_.per_segment[t_]).norm());
    ms_.m0 = m0;
    ms_.per_segment[t_] = mt;
    return change;
}

namespace {

std::vector<std::vector<int>> tracklets_by_segment(std::span<const Tracklet> tracklets, int n_segments) {
    std::vector<std::vector<int>> out(n_segments);
    for (int i = 0; i < static_cast<int>(tracklets.size()); ++i) {
        const int s = tracklets[i].segment;
        if (s < 0 || s >= n_segments) {
            throw InputError("tracklet " + std::to_string(tracklets[i].tid) + " has segment " + std::to_string(s) +
                             " outside the plan");
        }
        out[s].push_back(i);
    }
    return out;
}

std::vector<Tracklet> gather(std::span<const Tracklet> tracklets, const std::vector<int>& idx) {
    std::vector<Tracklet> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(tracklets[i]);
    return out;
}

// Mini-batch accumulator for the embedding updates.
class BatchStepper {
public:
    BatchStepper(EmbeddingNet& net, const Config& cfg) : net_(net), cfg_(cfg), acc_(zero_gradients(net)) {}

    void add(const NetGradients& g) {
        accumulate(acc_, g);
        if (++count_ == cfg_.batch_size) flush();
    }

    void flush() {
        if (count_ == 0) return;
        net_.apply_gradient(acc_, cfg_.learning_rate_beta / count_);
        acc_ = zero_gradients(net_);
        count_ = 0;
    }

private:
    EmbeddingNet& net_;
    const Config& cfg_;
    NetGradients acc_;
    int count_ = 0;
};

}  // namespace

EmbeddingNet warm_up(std::span<const Tracklet> tracklets, EmbeddingNet net, const Config& cfg) {
    if (cfg.warmup_epochs == 0 || tracklets.empty()) return net;
    int n_segments = 0;
    for (const auto& t : tracklets) n_segments = std::max(n_segments, t.segment + 1);
    const auto groups = tracklets_by_segment(tracklets, n_segments);
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(net.d_emb(), net.d_emb());
    Rng rng = make_stream(cfg.rng_seed, "warmup-pairs");
    for (int epoch = 0; epoch < cfg.warmup_epochs; ++epoch) {
        for (int s = 0; s < n_segments; ++s) {
            const auto local = gather(tracklets, groups[s]);
            const auto pc = collect_pairs(local, s, cfg.kappa, cfg.pairs_per_segment, rng);
            BatchStepper stepper(net, cfg);
            for (const auto& p : pc.pairs) {
                const auto& ra = local[p.a.tracklet].detections[p.a.response].feature;
                const auto& rb = local[p.b.tracklet].detections[p.b.response].feature;
                stepper.add(siamese_gradient(net, ra, rb, p.label, eye, cfg.margin_b, cfg.c_weight).grads);
            }
            stepper.flush();
        }
    }
    return net;
}

LearnResult learn_metrics(std::span<const Tracklet> tracklets, int n_segments, EmbeddingNet net, const Config& cfg) {
    if (n_segments < 1) throw InputError("learn_metrics needs at least one segment");
    const auto groups = tracklets_by_segment(tracklets, n_segments);
    OnlineMetricLearner learner(net.d_emb(), n_segments, cfg);
    LearnStats stats;
    Rng rng = make_stream(cfg.rng_seed, "metric-pairs");
    const int epochs = std::max(cfg.metric_epochs, cfg.finetune_epochs);

    for (int t = 0; t < n_segments; ++t) {
        learner.begin_segment(t);
        const auto local = gather(tracklets, groups[t]);
        const auto pc = collect_pairs(local, t, cfg.kappa, cfg.pairs_per_segment, rng);
        if (pc.negative_deficit) ++stats.deficit_segments;

        for (int epoch = 0; epoch < epochs; ++epoch) {
            BatchStepper stepper(net, cfg);
            for (const auto& p : pc.pairs) {
                const auto& ra = local[p.a.tracklet].detections[p.a.response].feature;
                const auto& rb = local[p.b.tracklet].detections[p.b.response].feature;
                if (epoch < cfg.metric_epochs) {
                    ++stats.pairs_seen;
                    switch (learner.update(net.embed(ra), net.embed(rb), p.label)) {
                    case OnlineMetricLearner::Step::Skipped: ++stats.skipped; break;
                    case OnlineMetricLearner::Step::Negative: ++stats.negative_updates; break;
                    case OnlineMetricLearner::Step::Positive: ++stats.positive_updates; break;
                    }
                }
                if (epoch < cfg.finetune_epochs) {
                    const auto& ms = learner.metrics();
                    stepper.add(siamese_gradient(net, ra, rb, p.label, ms.total(t), cfg.margin_b, cfg.c_weight).grads);
                }
            }
            stepper.flush();
        }
        stats.max_reprojection_change = std::max(stats.max_reprojection_change, learner.end_segment());
    }
    return {learner.metrics(), std::move(net), stats};
}

void write_metrics(std::ostream& os, const MetricSet& ms) {
    os << kMetricMagic << ' ' << kMetricVersion << '\n';
    os << "segments " << ms.n_segments() << " dim " << ms.d_emb() << '\n';
    os << std::setprecision(17);
    auto dump = [&](const Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) os << (c ? " " : "") << m(r, c);
            os << '\n';
        }
    };
    dump(ms.m0);
    for (const auto& m : ms.per_segment) dump(m);
}

MetricSet read_metrics(std::istream& is) {
    std::string magic, w1, w2;
    int version = 0, n = 0, d = 0;
    if (!(is >> magic >> version) || magic != kMetricMagic) throw InputError("not a metric checkpoint");
    if (version != kMetricVersion) throw InputError("unsupported metric checkpoint version " + std::to_string(version));
    if (!(is >> w1 >> n >> w2 >> d) || w1 != "segments" || w2 != "dim" || n < 0 || d < 1) {
        throw InputError("metric checkpoint: bad header");
    }
    auto load = [&]() {
        Eigen::MatrixXd m(d, d);
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c)
                if (!(is >> m(r, c))) throw InputError("metric checkpoint: truncated matrix");
        return m;
    };
    MetricSet ms;
    ms.m0 = load();
    for (int t = 0; t < n; ++t) ms.per_segment.push_back(load());
    return ms;
}

void save_metrics_file(const std::string& path, const MetricSet& ms) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    write_metrics(out, ms);
}

MetricSet load_metrics_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return read_metrics(in);
}

}  // namespace tcmot
