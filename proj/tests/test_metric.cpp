#include "oracles.hpp"
#include "tcmot/metric.hpp"
#include "tcmot/synth.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

using namespace tcmot;

namespace {

struct Instance {
    std::vector<TrainPair> pairs;
    MetricSet ms;
    Config cfg;
};

// Random instance with every hinge comfortably away from its kink.
Instance random_instance(std::mt19937_64& rng, int d, int n_seg, int n_pairs) {
    Instance in;
    in.cfg.lambda0 = 0.3;
    in.cfg.lambda = 0.2;
    in.cfg.eta = 0.4;
    in.cfg.c_weight = 0.8;
    in.cfg.margin_b = 0.5;
    in.ms.m0 = oracle::random_psd(rng, d);
    for (int t = 0; t < n_seg; ++t) in.ms.per_segment.push_back(oracle::random_psd(rng, d, 0.5));
    while (static_cast<int>(in.pairs.size()) < n_pairs) {
        TrainPair p{oracle::random_vector(rng, d, 0.6), oracle::random_vector(rng, d, 0.6),
                    (rng() % 2) ? 1 : -1, static_cast<int>(rng() % n_seg)};
        const double g = in.cfg.margin_b - p.label * (1.0 - oracle::quad(p.x_i, p.x_j, in.ms.total(p.segment)));
        if (std::abs(g) > 1e-3) in.pairs.push_back(p);
    }
    return in;
}

std::vector<oracle::Pair> as_oracle(const std::vector<TrainPair>& pairs) {
    std::vector<oracle::Pair> out;
    for (const auto& p : pairs) out.push_back({p.x_i, p.x_j, p.label, p.segment});
    return out;
}

double objective(const Instance& in, const Eigen::MatrixXd& m0, const std::vector<Eigen::MatrixXd>& mt,
                 int last = -1) {
    return oracle::objective(as_oracle(in.pairs), m0, mt, in.cfg.lambda0, in.cfg.lambda, in.cfg.eta,
                             in.cfg.c_weight, in.cfg.margin_b, last);
}

Tracklet make_tracklet(int tid, int first, int len, int identity, const std::vector<double>& conf,
                       std::mt19937_64& rng, int d = 2) {
    Tracklet t;
    t.tid = tid;
    for (int k = 0; k < len; ++k) {
        Detection det(first + k, Box{0, 0, 10, 20}, conf.empty() ? 1.0 : conf[k],
                      oracle::random_vector(rng, d, 0.1) + Eigen::VectorXd::Constant(d, identity));
        set_truth_identity(det, identity);
        t.detections.push_back(det);
    }
    return t;
}

}  // namespace

TEST(Mahalanobis, Examples) {
    const Eigen::VectorXd a = Eigen::Vector2d(3, 4);
    const Eigen::VectorXd z = Eigen::Vector2d(2, 2);
    EXPECT_DOUBLE_EQ(mahalanobis_sq(a, z, Eigen::MatrixXd::Identity(2, 2)), 1 + 4);
    EXPECT_DOUBLE_EQ(mahalanobis_sq(a, a, Eigen::MatrixXd::Identity(2, 2)), 0.0);
    EXPECT_DOUBLE_EQ(mahalanobis_sq(Eigen::Vector2d(1, 2), Eigen::Vector2d(0, 0), Eigen::Vector2d(3, 4).asDiagonal()),
                     19.0);
    EXPECT_THROW(mahalanobis_sq(a, Eigen::Vector3d(0, 0, 0), Eigen::MatrixXd::Identity(2, 2)), InputError);
}

TEST(Mahalanobis, NonNegativeUnderPsdMetrics) {
    std::mt19937_64 rng(1);
    for (int k = 0; k < 200; ++k) {
        const auto m = oracle::random_psd(rng, 5);
        EXPECT_GE(mahalanobis_sq(oracle::random_vector(rng, 5), oracle::random_vector(rng, 5), m), 0.0);
    }
}

TEST(PairLoss, Examples) {
    MetricSet ms = MetricSet::initial(1, 1);
    // Distance 0 positive pair: max(0, 0.5 - 1) = 0.
    EXPECT_DOUBLE_EQ(pair_loss({Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), 1, 0}, ms, 0.5), 0.0);
    // Distance 0 negative pair: max(0, 0.5 + 1) = 1.5.
    EXPECT_DOUBLE_EQ(pair_loss({Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), -1, 0}, ms, 0.5), 1.5);
    // Distance 0.8 positive pair: 0.5 - 0.2 = 0.3.
    Eigen::VectorXd x(1);
    x << std::sqrt(0.8);
    EXPECT_NEAR(pair_loss({x, Eigen::VectorXd::Zero(1), 1, 0}, ms, 0.5), 0.3, 1e-15);
}

TEST(TotalLoss, Examples) {
    Config cfg;
    EXPECT_DOUBLE_EQ(total_loss({}, MetricSet::initial(4, 3), cfg), 0.0);
    MetricSet one = MetricSet::initial(6, 1);
    one.per_segment[0] = Eigen::MatrixXd::Identity(6, 6);
    EXPECT_NEAR(total_loss({}, one, cfg), 0.01 * 6, 1e-15);
}

TEST(TotalLoss, MatchesTermByTermSummation) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        const auto in = random_instance(rng, 2 + trial % 5, 1 + trial % 3, 1 + trial % 10);
        EXPECT_NEAR(total_loss(in.pairs, in.ms, in.cfg), objective(in, in.ms.m0, in.ms.per_segment), 1e-12);
    }
}

TEST(GradM0, Examples) {
    Config cfg;
    MetricSet ms = MetricSet::initial(3, 2);
    EXPECT_TRUE(grad_m0({}, ms, cfg).isZero(0.0));
    cfg.lambda0 = 1e-300;  // isolate the empirical term
    const Eigen::VectorXd xi = Eigen::Vector3d(0.1, 0.2, 0.0);
    const Eigen::VectorXd xj = Eigen::Vector3d(0.0, 0.0, 0.1);
    const TrainPair p{xi, xj, -1, 1};
    const Eigen::MatrixXd a = (xi - xj) * (xi - xj).transpose();
    EXPECT_TRUE(grad_m0(std::span(&p, 1), ms, cfg).isApprox(-cfg.c_weight * a, 1e-12));
}

TEST(GradM0, MatchesFiniteDifferences) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const auto in = random_instance(rng, 2 + trial % 7, 1 + trial % 3, 1 + trial % 10);
        const auto fd = oracle::fd_matrix_gradient(
            [&](const Eigen::MatrixXd& m0) { return objective(in, m0, in.ms.per_segment); }, in.ms.m0);
        EXPECT_LT(oracle::relative_error(grad_m0(in.pairs, in.ms, in.cfg), fd), 1e-5);
    }
}

TEST(GradMt, Examples) {
    Config cfg;
    MetricSet ms = MetricSet::initial(3, 2);
    EXPECT_TRUE(grad_mt(0, {}, ms, cfg).isZero(0.0));
    cfg.lambda = 1e-300;
    ms.per_segment[0] = Eigen::MatrixXd::Identity(3, 3);
    ms.per_segment[1] = ms.per_segment[0];
    EXPECT_LT(grad_mt(1, {}, ms, cfg).norm(), 1e-250);
    EXPECT_THROW(grad_mt(2, {}, ms, cfg), InputError);
    EXPECT_THROW(grad_mt(-1, {}, ms, cfg), InputError);
}

TEST(GradMt, MatchesFiniteDifferencesOfOnlineObjective) {
    // The online gradient omits the coupling to M_{t+1}; its reference objective is
    // the loss over segments 0..t, which is the full loss for the last segment.
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        const auto in = random_instance(rng, 2 + trial % 7, 1 + trial % 3, 1 + trial % 10);
        for (int t = 0; t < in.ms.n_segments(); ++t) {
            const auto fd = oracle::fd_matrix_gradient(
                [&](const Eigen::MatrixXd& mt) {
                    auto segs = in.ms.per_segment;
                    segs[t] = mt;
                    return objective(in, in.ms.m0, segs, t);
                },
                in.ms.per_segment[t]);
            EXPECT_LT(oracle::relative_error(grad_mt(t, in.pairs, in.ms, in.cfg), fd), 1e-5) << "t=" << t;
        }
        const int last = in.ms.n_segments() - 1;
        const auto full = oracle::fd_matrix_gradient(
            [&](const Eigen::MatrixXd& mt) {
                auto segs = in.ms.per_segment;
                segs[last] = mt;
                return total_loss(in.pairs, MetricSet{in.ms.m0, segs}, in.cfg);
            },
            in.ms.per_segment[last]);
        EXPECT_LT(oracle::relative_error(grad_mt(last, in.pairs, in.ms, in.cfg), full), 1e-5);
    }
}

TEST(PsdProject, FixedPointAndClamp) {
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(4, 4);
    EXPECT_EQ(psd_project(eye), eye);
    const Eigen::MatrixXd d = Eigen::Vector2d(1, -2).asDiagonal();
    EXPECT_LT((psd_project(d) - Eigen::MatrixXd(Eigen::Vector2d(1, 0).asDiagonal())).norm(), 1e-15);
    Eigen::MatrixXd bad = eye;
    bad(0, 0) = std::nan("");
    EXPECT_THROW(psd_project(bad), InputError);
}

TEST(PsdProject, NearestPsdAgainstJacobiOracle) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const int d = 2 + trial % 7;
        const Eigen::MatrixXd a = oracle::random_matrix(rng, d, d);
        const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
        const Eigen::MatrixXd p = psd_project(sym);
        EXPECT_LT((p - oracle::nearest_psd(sym)).norm(), 1e-9);
        EXPECT_LT((p - p.transpose()).norm(), 1e-12);
        EXPECT_GE(min_eigenvalue(p), -1e-9);
        // No random PSD matrix near the projection is closer to the input.
        const double best = (p - sym).norm();
        for (int k = 0; k < 50; ++k) {
            const Eigen::MatrixXd q = oracle::nearest_psd(p + 0.05 * oracle::random_psd(rng, d) -
                                                          0.05 * oracle::random_psd(rng, d));
            EXPECT_GE((q - sym).norm(), best - 1e-12);
        }
        // Already-PSD input is a fixed point.
        const Eigen::MatrixXd s = oracle::random_psd(rng, d);
        EXPECT_LT((psd_project(s) - s).norm(), 1e-12);
    }
}

TEST(NegativeUpdate, EmpiricalTermNeverLowersMinEigenvalue) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 2 + trial % 6;
        const Eigen::MatrixXd m = oracle::random_psd(rng, d);
        const auto xi = oracle::random_vector(rng, d);
        const auto xj = oracle::random_vector(rng, d);
        const Eigen::MatrixXd a = (xi - xj) * (xi - xj).transpose();
        // M - beta * C * l * A with l = -1
        const Eigen::MatrixXd next = m + 0.01 * 0.5 * a;
        EXPECT_GE(min_eigenvalue(next), min_eigenvalue(m) - 1e-12);
    }
}

TEST(StrongestResponses, ConfidenceOrderWithEarlierFrameTieBreak) {
    std::mt19937_64 rng(7);
    const auto t = make_tracklet(0, 10, 6, 1, {0.5, 0.9, 0.7, 0.9, 0.1, 0.7}, rng);
    EXPECT_EQ(strongest_responses(t, 4), (std::vector<int>{1, 3, 2, 5}));
    EXPECT_EQ(strongest_responses(t, 10).size(), 6u);
}

TEST(CollectPairs, SingleTrackletHasNoNegatives) {
    std::mt19937_64 rng(8);
    const std::vector<Tracklet> ts{make_tracklet(0, 1, 4, 1, {}, rng)};
    Rng r = make_stream(1, "t");
    const auto pc = collect_pairs(ts, 0, 4, 1, r);
    EXPECT_TRUE(pc.negative_deficit);
    ASSERT_EQ(pc.pairs.size(), 1u);
    EXPECT_EQ(pc.pairs[0].label, 1);
    EXPECT_EQ(pc.pairs[0].a.tracklet, 0);
    EXPECT_EQ(pc.pairs[0].b.tracklet, 0);
    EXPECT_NE(pc.pairs[0].a.response, pc.pairs[0].b.response);
}

TEST(CollectPairs, OverlappingTrackletsGiveCrossNegatives) {
    std::mt19937_64 rng(9);
    const std::vector<Tracklet> ts{make_tracklet(0, 1, 8, 1, {}, rng), make_tracklet(1, 1, 8, 2, {}, rng)};
    Rng r = make_stream(2, "t");
    const auto pc = collect_pairs(ts, 3, 4, 5, r);
    EXPECT_FALSE(pc.negative_deficit);
    EXPECT_EQ(pc.m, 5);
    int pos = 0, neg = 0;
    for (const auto& p : pc.pairs) {
        EXPECT_EQ(p.segment, 3);
        if (p.label < 0) {
            ++neg;
            EXPECT_NE(p.a.tracklet, p.b.tracklet);
        } else {
            ++pos;
            EXPECT_EQ(p.a.tracklet, p.b.tracklet);
        }
    }
    EXPECT_EQ(pos, 5);
    EXPECT_EQ(neg, 5);
}

TEST(CollectPairs, ExhaustivePredicateCheck) {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> c1, c2, c3;
        for (int k = 0; k < 9; ++k) c1.push_back(u(rng)), c2.push_back(u(rng)), c3.push_back(u(rng));
        // Tracklets 0 and 1 overlap; tracklet 2 overlaps neither.
        const std::vector<Tracklet> ts{make_tracklet(0, 1, 9, 1, c1, rng), make_tracklet(1, 5, 9, 2, c2, rng),
                                       make_tracklet(2, 30, 9, 3, c3, rng)};
        Rng r = make_stream(trial, "t");
        const int kappa = 2 + trial % 4;
        const auto pc = collect_pairs(ts, 0, kappa, 64, r);
        std::set<std::tuple<int, int, int, int>> seen;
        for (const auto& p : pc.pairs) {
            const auto sa = strongest_responses(ts[p.a.tracklet], kappa);
            const auto sb = strongest_responses(ts[p.b.tracklet], kappa);
            EXPECT_NE(std::find(sa.begin(), sa.end(), p.a.response), sa.end());
            EXPECT_NE(std::find(sb.begin(), sb.end(), p.b.response), sb.end());
            EXPECT_TRUE(seen.insert({p.a.tracklet, p.a.response, p.b.tracklet, p.b.response}).second);
            if (p.label < 0) {
                EXPECT_TRUE(ts[p.a.tracklet].overlaps(ts[p.b.tracklet]));
                EXPECT_NE(truth_identity(ts[p.a.tracklet].head()), truth_identity(ts[p.b.tracklet].head()));
            } else {
                EXPECT_EQ(p.a.tracklet, p.b.tracklet);
                EXPECT_NE(p.a.response, p.b.response);
            }
        }
        // Balanced: m of each kind, capped by the kappa*kappa conflicting combinations.
        const int npos = 3 * kappa * (kappa - 1) / 2;
        EXPECT_EQ(pc.m, std::min({64, npos, kappa * kappa}));
        EXPECT_EQ(static_cast<int>(pc.pairs.size()), 2 * pc.m);
    }
}

TEST(OnlineLearner, MarginSatisfiedPairLeavesMetricsBitIdentical) {
    Config cfg;
    OnlineMetricLearner learner(3, 2, cfg);
    learner.begin_segment(0);
    // Push the metrics away from their initial values first.
    learner.update(Eigen::Vector3d(0.1, 0.4, 0.0), Eigen::Vector3d(0.0, 0.0, 0.3), -1);
    learner.update(Eigen::Vector3d(1.0, 0.0, 0.0), Eigen::Vector3d(0.0, 0.3, 0.0), 1);
    const MetricSet before = learner.metrics();
    // Positive pair at distance 0: l (1 - d) = 1 > b.
    EXPECT_EQ(learner.update(Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(1, 2, 3), 1),
              OnlineMetricLearner::Step::Skipped);
    // Negative pair far apart: l (1 - d) = d - 1 > b.
    EXPECT_EQ(learner.update(Eigen::Vector3d(9, 0, 0), Eigen::Vector3d(0, 0, 0), -1),
              OnlineMetricLearner::Step::Skipped);
    EXPECT_TRUE(learner.metrics() == before);
}

TEST(OnlineLearner, SegmentInitialisation) {
    Config cfg;
    OnlineMetricLearner learner(2, 3, cfg);
    learner.begin_segment(0);
    EXPECT_TRUE(learner.metrics().per_segment[0].isZero(0.0));
    EXPECT_EQ(learner.metrics().m0, Eigen::MatrixXd::Identity(2, 2));
    EXPECT_EQ(learner.update(Eigen::Vector2d(1.0, 0.5), Eigen::Vector2d(0, 0), 1),
              OnlineMetricLearner::Step::Positive);
    EXPECT_EQ(learner.update(Eigen::Vector2d(0.2, 0.1), Eigen::Vector2d(0, 0), -1),
              OnlineMetricLearner::Step::Negative);
    learner.end_segment();
    const Eigen::MatrixXd m1 = learner.metrics().per_segment[0];
    EXPECT_FALSE(m1.isZero(0.0));
    learner.begin_segment(1);
    EXPECT_EQ(learner.metrics().per_segment[1], m1);
}

TEST(OnlineLearner, UpdateBeforeBeginIsAnError) {
    OnlineMetricLearner learner(2, 1, Config{});
    EXPECT_THROW(learner.update(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1), 1), ConsistencyError);
}

TEST(LearnMetrics, NoPairsKeepsInitialisation) {
    Config cfg;
    cfg.d_emb = 3;
    const auto net = EmbeddingNet::identity(3);
    const auto r = learn_metrics({}, 4, net, cfg);
    EXPECT_TRUE(r.metrics == MetricSet::initial(3, 4));
    EXPECT_TRUE(r.net == net);
    EXPECT_EQ(r.stats.pairs_seen, 0);
}

TEST(LearnMetrics, MarginSatisfiedPairsChangeNothing) {
    // Identical responses inside one tracklet: every positive pair has d = 0.
    Tracklet t;
    for (int f = 1; f <= 5; ++f) t.detections.emplace_back(f, Box{0, 0, 1, 1}, 1.0, Eigen::Vector2d(1, 1));
    Config cfg;
    const auto r = learn_metrics(std::vector<Tracklet>{t}, 1, EmbeddingNet::identity(2), cfg);
    EXPECT_GT(r.stats.pairs_seen, 0);
    EXPECT_EQ(r.stats.skipped, r.stats.pairs_seen);
    EXPECT_TRUE(r.metrics == MetricSet::initial(2, 1));
    EXPECT_TRUE(r.net == EmbeddingNet::identity(2));
}

namespace {

std::vector<Tracklet> two_cluster_tracklets(std::mt19937_64& rng, int n_seg, int seg_len, double sigma) {
    // Two identities along the first axis; noise dominates the other axes.
    std::normal_distribution<double> n(0.0, sigma);
    std::vector<Tracklet> out;
    int tid = 0;
    for (int s = 0; s < n_seg; ++s) {
        for (int id = 0; id < 2; ++id) {
            for (int rep = 0; rep < 3; ++rep) {
                Tracklet t;
                t.tid = tid++;
                t.segment = s;
                const int first = s * seg_len + 1 + rep * 10;
                for (int k = 0; k < 8; ++k) {
                    Eigen::VectorXd f(4);
                    f << (id ? 0.5 : -0.5) + 0.05 * n(rng), n(rng), n(rng), n(rng);
                    t.detections.emplace_back(first + k, Box{0, 0, 1, 1}, 0.5 + 0.01 * k, f);
                }
                out.push_back(std::move(t));
            }
        }
    }
    return out;
}

}  // namespace

TEST(LearnMetrics, HeldOutLossDecreases) {
    std::mt19937_64 rng(11);
    const auto train = two_cluster_tracklets(rng, 2, 60, 0.3);
    const auto held = two_cluster_tracklets(rng, 2, 60, 0.3);
    Config cfg;
    cfg.c_weight = 1.0;
    cfg.learning_rate_beta = 0.05;
    const auto net = EmbeddingNet::identity(4);
    const auto r = learn_metrics(train, 2, net, cfg);
    std::vector<TrainPair> pairs;
    for (int s = 0; s < 2; ++s) {
        std::vector<Tracklet> local;
        for (const auto& t : held)
            if (t.segment == s) local.push_back(t);
        Rng pr = make_stream(99, "held");
        const auto pc = collect_pairs(local, s, 4, 64, pr);
        for (auto& p : embed_pairs(pc, local, net)) pairs.push_back(p);
    }
    EXPECT_LT(total_loss(pairs, r.metrics, cfg), total_loss(pairs, MetricSet::initial(4, 2), cfg));
}

TEST(LearnMetrics, ResultIsPsdAndDeterministic) {
    std::mt19937_64 rng(12);
    const auto train = two_cluster_tracklets(rng, 3, 60, 0.4);
    Config cfg;
    cfg.c_weight = 1.0;
    cfg.d_in = 4;
    cfg.d_hidden = 6;
    cfg.d_emb = 3;
    const std::vector<int> dims{4, 6, 3};
    const auto net = EmbeddingNet::initialized(dims, 5);
    const auto a = learn_metrics(train, 3, net, cfg);
    const auto b = learn_metrics(train, 3, net, cfg);
    EXPECT_TRUE(a.metrics == b.metrics);
    EXPECT_TRUE(a.net == b.net);
    EXPECT_FALSE(a.net == net);
    EXPECT_GE(min_eigenvalue(a.metrics.m0), -1e-9);
    for (const auto& m : a.metrics.per_segment) {
        EXPECT_GE(min_eigenvalue(m), -1e-9);
        EXPECT_LT((m - m.transpose()).norm(), 1e-9);
    }
    EXPECT_GT(a.stats.positive_updates + a.stats.negative_updates, 0);
}

TEST(LearnMetrics, CommonMetricOnlyKeepsSegmentMetricsZero) {
    std::mt19937_64 rng(13);
    const auto train = two_cluster_tracklets(rng, 2, 60, 0.4);
    Config cfg;
    cfg.c_weight = 1.0;
    cfg.use_segment_metrics = false;
    const auto r = learn_metrics(train, 2, EmbeddingNet::identity(4), cfg);
    for (const auto& m : r.metrics.per_segment) EXPECT_TRUE(m.isZero(0.0));
    EXPECT_FALSE(r.metrics.m0 == Eigen::MatrixXd::Identity(4, 4));
}

TEST(LearnMetrics, TrackletSegmentOutsidePlanIsAnError) {
    std::mt19937_64 rng(14);
    auto ts = two_cluster_tracklets(rng, 2, 60, 0.4);
    EXPECT_THROW(learn_metrics(ts, 1, EmbeddingNet::identity(4), Config{}), InputError);
}

TEST(MetricCheckpoint, RoundTripIsExact) {
    std::mt19937_64 rng(15);
    MetricSet ms;
    ms.m0 = oracle::random_psd(rng, 5);
    for (int t = 0; t < 3; ++t) ms.per_segment.push_back(oracle::random_psd(rng, 5));
    std::stringstream ss;
    write_metrics(ss, ms);
    EXPECT_TRUE(read_metrics(ss) == ms);
    std::stringstream bad("tcmot-metrics 99\n");
    EXPECT_THROW(read_metrics(bad), InputError);
}
