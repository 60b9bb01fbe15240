#include "tcmot/pipeline.hpp"

#include "tcmot/trackgen.hpp"

#include <algorithm>
#include <string>
#include <utility>

namespace tcmot {
namespace {

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const InputError& e) {
        throw InputError(std::string(name) + ": " + e.what());
    } catch (const ConsistencyError& e) {
        throw ConsistencyError(std::string(name) + ": " + e.what());
    }
}

}  // namespace

EmbeddingNet default_net(const Config& cfg) {
    std::vector<int> dims{cfg.d_in};
    if (cfg.d_hidden > 0) dims.push_back(cfg.d_hidden);
    dims.push_back(cfg.d_emb);
    return EmbeddingNet::initialized(dims, cfg.rng_seed);
}

void assign_segments(std::vector<Tracklet>& tracklets, const SegmentPlan& plan) {
    for (auto& t : tracklets) t.segment = plan.segment_of(t.first_frame());
}

PipelineResult associate(std::vector<Tracklet> tracklets, const SegmentPlan& plan, const MetricSet& ms,
                         const EmbeddingNet& net, const Config& cfg) {
    PipelineResult r;
    r.tracklets = std::move(tracklets);
    r.plan = plan;
    r.metrics = ms;
    r.net = net;
    r.affinity = stage("affinity", [&] { return build_affinity(r.tracklets, r.metrics, r.net, cfg); });
    r.assignment = stage("assoc", [&] { return softassign(r.affinity.p, cfg.solver); });
    r.trajectories = stage("merge", [&] {
        auto merged = merge_tracklets(r.tracklets, r.assignment);
        for (auto& t : merged) t = interpolate_gaps(t);
        return merged;
    });
    return r;
}

PipelineResult run_pipeline(std::span<const Detection> dets, const Config& cfg, std::optional<EmbeddingNet> net) {
    stage("config", [&] { return validate_config(cfg); });
    for (const auto& d : dets) {
        if (d.feature.size() != cfg.d_in) {
            throw InputError("input: detection at frame " + std::to_string(d.frame) + " has feature dimension " +
                             std::to_string(d.feature.size()) + ", expected d_in=" + std::to_string(cfg.d_in));
        }
    }
    EmbeddingNet model = net ? std::move(*net) : default_net(cfg);
    if (model.d_in() != cfg.d_in || model.d_emb() != cfg.d_emb) {
        throw InputError("input: embedding dimensions do not match d_in/d_emb");
    }

    PipelineResult r;
    if (dets.empty()) {
        r.net = std::move(model);
        r.plan = plan_segments(1, cfg.segment_length);
        r.metrics = MetricSet::initial(cfg.d_emb, r.plan.n_segments());
        return r;
    }

    auto tracklets = stage("trackgen", [&] { return generate_tracklets(dets, cfg.trackgen); });
    int last = 1;
    for (const auto& d : dets) last = std::max(last, d.frame);
    const SegmentPlan plan = plan_segments(last, cfg.segment_length);
    assign_segments(tracklets, plan);

    auto learned = stage("learn", [&] {
        EmbeddingNet warm = warm_up(tracklets, std::move(model), cfg);
        return learn_metrics(tracklets, plan.n_segments(), std::move(warm), cfg);
    });

    r = associate(std::move(tracklets), plan, learned.metrics, learned.net, cfg);
    r.stats = learned.stats;
    return r;
}

}  // namespace tcmot
