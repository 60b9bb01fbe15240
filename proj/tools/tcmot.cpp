#include "tcmot/config.hpp"
#include "tcmot/eval.hpp"
#include "tcmot/io.hpp"
#include "tcmot/pipeline.hpp"
#include "tcmot/synth.hpp"
#include "tcmot/trackgen.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace tcmot;

namespace {

/// Registers `--key value` for every config key; values are kept as text until applied.
struct ConfigFlags {
    std::string config_path;
    std::map<std::string, std::string> values;

    void attach(CLI::App& app) {
        app.add_option("--config", config_path, "key=value configuration file");
        for (const auto& [key, _] : config_to_map(Config{})) {
            app.add_option("--" + key, values[key], "config key " + key);
        }
    }

    Config resolve(const CLI::App& app) const {
        Config cfg = config_path.empty() ? Config{} : load_config_file(config_path);
        std::map<std::string, std::string> given;
        for (const auto& [key, text] : values) {
            if (app.count("--" + key) > 0) given[key] = text;
        }
        return validate_config(apply_config_values(cfg, given));
    }
};

template <class F>
void with_synth_fields(SynthConfig& c, F&& f) {
    f("n_objects", c.n_objects);
    f("n_frames", c.n_frames);
    f("arena_width", c.arena_width);
    f("arena_height", c.arena_height);
    f("min_width", c.min_width);
    f("max_width", c.max_width);
    f("aspect", c.aspect);
    f("min_speed", c.min_speed);
    f("max_speed", c.max_speed);
    f("turn_rate", c.turn_rate);
    f("max_turn", c.max_turn);
    f("n_crossings", c.n_crossings);
    f("sigma_pos", c.sigma_pos);
    f("sigma_size", c.sigma_size);
    f("miss_rate", c.miss_rate);
    f("miss_persistence", c.miss_persistence);
    f("d_in", c.d_in);
    f("feature_scale", c.feature_scale);
    f("sigma_feat", c.sigma_feat);
    f("rng_seed", c.rng_seed);
}

void write_file(const std::string& path, const auto& writer) {
    std::ofstream os(path);
    if (!os) throw InputError("cannot write " + path);
    writer(os);
    if (!os) throw InputError("write failed for " + path);
}

void dump_stages(const std::string& dir, const PipelineResult& r) {
    std::filesystem::create_directories(dir);
    write_file(dir + "/tracklets.csv", [&](std::ostream& os) { write_tracklets(os, r.tracklets); });
    save_metrics_file(dir + "/metrics.txt", r.metrics);
    save_net_file(dir + "/net.txt", r.net);
    write_file(dir + "/affinity.csv", [&](std::ostream& os) { write_affinity_csv(os, r.affinity); });
    write_file(dir + "/assignment.csv", [&](std::ostream& os) {
        for (int i = 0; i < r.assignment.size(); ++i) {
            const int j = r.assignment.successor[i];
            if (j >= 0) os << r.affinity.tids[i] << ',' << r.affinity.tids[j] << '\n';
        }
    });
}

std::vector<Tracklet> tracklets_for(const std::vector<Detection>& dets, const Config& cfg, SegmentPlan& plan) {
    auto tracklets = generate_tracklets(dets, cfg.trackgen);
    int last = 1;
    for (const auto& d : dets) last = std::max(last, d.frame);
    plan = plan_segments(last, cfg.segment_length);
    assign_segments(tracklets, plan);
    return tracklets;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Offline tracklet association with temporally constrained metric learning"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic scene");
    std::string synth_out, synth_gt;
    std::map<std::string, std::string> synth_values;
    synth->add_option("--out", synth_out, "detections CSV (features go to <out>.feat)")->required();
    synth->add_option("--gt", synth_gt, "ground-truth trajectories CSV")->required();
    {
        SynthConfig defaults;
        with_synth_fields(defaults, [&](const char* name, auto&) {
            synth->add_option(std::string("--") + name, synth_values[name], std::string("scene parameter ") + name);
        });
    }

    // tracklets
    auto* trk = app.add_subcommand("tracklets", "Generate tracklets from detections");
    ConfigFlags trk_cfg;
    std::string trk_in, trk_feat, trk_out;
    trk->add_option("--detections", trk_in)->required();
    trk->add_option("--features", trk_feat);
    trk->add_option("--out", trk_out)->required();
    trk_cfg.attach(*trk);

    // learn
    auto* learn = app.add_subcommand("learn", "Learn metrics and fine-tune the embedding");
    ConfigFlags learn_cfg;
    std::string learn_in, learn_feat, learn_metrics_out, learn_net_out, learn_net_in;
    learn->add_option("--detections", learn_in)->required();
    learn->add_option("--features", learn_feat);
    learn->add_option("--metrics-out", learn_metrics_out)->required();
    learn->add_option("--net-out", learn_net_out)->required();
    learn->add_option("--net-in", learn_net_in, "initial embedding checkpoint");
    learn_cfg.attach(*learn);

    // associate
    auto* assoc = app.add_subcommand("associate", "Associate tracklets with learned metrics");
    ConfigFlags assoc_cfg;
    std::string assoc_in, assoc_feat, assoc_metrics, assoc_net, assoc_out, assoc_dump;
    assoc->add_option("--detections", assoc_in)->required();
    assoc->add_option("--features", assoc_feat);
    assoc->add_option("--metrics", assoc_metrics)->required();
    assoc->add_option("--net", assoc_net)->required();
    assoc->add_option("--out", assoc_out)->required();
    assoc->add_option("--dump-dir", assoc_dump, "write stage artifacts here");
    assoc_cfg.attach(*assoc);

    // track
    auto* track = app.add_subcommand("track", "Run the full pipeline on one or more sequences");
    ConfigFlags track_cfg;
    std::vector<std::string> track_in, track_out;
    std::string track_net, track_dump;
    track->add_option("--detections", track_in, "detection CSVs (features from <csv>.feat)")->required();
    track->add_option("--out", track_out, "one trajectory CSV per input")->required();
    track->add_option("--net-in", track_net, "initial embedding checkpoint");
    track->add_option("--dump-dir", track_dump, "write stage artifacts to <dir>/<k>/");
    track_cfg.attach(*track);

    // eval
    auto* ev = app.add_subcommand("eval", "CLEAR-MOT evaluation");
    std::string ev_gt, ev_pred, ev_json;
    double ev_iou = 0.5;
    ev->add_option("--gt", ev_gt)->required();
    ev->add_option("--pred", ev_pred)->required();
    ev->add_option("--iou", ev_iou, "IoU threshold");
    ev->add_option("--json", ev_json, "write the report as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*synth) {
            SynthConfig sc;
            std::map<std::string, std::string> given;
            for (const auto& [k, v] : synth_values) {
                if (synth->count("--" + k) > 0) given[k] = v;
            }
            with_synth_fields(sc, [&](const char* name, auto& field) {
                auto it = given.find(name);
                if (it == given.end()) return;
                std::istringstream is(it->second);
                if (!(is >> field) || !(is >> std::ws).eof()) {
                    throw InputError(std::string("--") + name + ": cannot parse '" + it->second + "'");
                }
            });
            const SynthScene scene = synth_scene(sc);
            save_detections(synth_out, scene.detections);
            emit_trajectories(scene.ground_truth, synth_gt);
        } else if (*trk) {
            const Config cfg = trk_cfg.resolve(*trk);
            const auto dets = load_detections(trk_in, trk_feat);
            SegmentPlan plan;
            const auto tracklets = tracklets_for(dets, cfg, plan);
            write_file(trk_out, [&](std::ostream& os) { write_tracklets(os, tracklets); });
        } else if (*learn) {
            const Config cfg = learn_cfg.resolve(*learn);
            const auto dets = load_detections(learn_in, learn_feat);
            SegmentPlan plan;
            const auto tracklets = tracklets_for(dets, cfg, plan);
            EmbeddingNet net = learn_net_in.empty() ? default_net(cfg) : load_net_file(learn_net_in);
            net = warm_up(tracklets, std::move(net), cfg);
            const LearnResult lr = learn_metrics(tracklets, plan.n_segments(), std::move(net), cfg);
            save_metrics_file(learn_metrics_out, lr.metrics);
            save_net_file(learn_net_out, lr.net);
            std::cerr << "pairs " << lr.stats.pairs_seen << ", skipped " << lr.stats.skipped << ", negative "
                      << lr.stats.negative_updates << ", positive " << lr.stats.positive_updates
                      << ", max re-projection change " << lr.stats.max_reprojection_change << '\n';
        } else if (*assoc) {
            const Config cfg = assoc_cfg.resolve(*assoc);
            const auto dets = load_detections(assoc_in, assoc_feat);
            SegmentPlan plan;
            auto tracklets = tracklets_for(dets, cfg, plan);
            const MetricSet ms = load_metrics_file(assoc_metrics);
            if (ms.n_segments() != plan.n_segments()) {
                throw InputError("metrics file has " + std::to_string(ms.n_segments()) +
                                 " segments, the detections need " + std::to_string(plan.n_segments()));
            }
            const PipelineResult r = associate(std::move(tracklets), plan, ms, load_net_file(assoc_net), cfg);
            emit_trajectories(r.trajectories, assoc_out);
            if (!assoc_dump.empty()) dump_stages(assoc_dump, r);
        } else if (*track) {
            const Config cfg = track_cfg.resolve(*track);
            if (track_in.size() != track_out.size()) throw InputError("--detections and --out counts differ");
            std::optional<EmbeddingNet> init;
            if (!track_net.empty()) init = load_net_file(track_net);
            std::vector<std::future<void>> jobs;
            for (std::size_t k = 0; k < track_in.size(); ++k) {
                jobs.push_back(std::async(std::launch::async, [&, k] {
                    const auto dets = load_detections(track_in[k]);
                    const PipelineResult r = run_pipeline(dets, cfg, init);
                    emit_trajectories(r.trajectories, track_out[k]);
                    if (!track_dump.empty()) dump_stages(track_dump + "/" + std::to_string(k), r);
                }));
            }
            for (auto& j : jobs) j.get();
        } else if (*ev) {
            const auto gt = load_trajectories(ev_gt);
            const auto pred = load_trajectories(ev_pred);
            const EvalReport rep = evaluate(gt, pred, ev_iou);
            write_report_table(std::cout, rep);
            if (!ev_json.empty()) write_file(ev_json, [&](std::ostream& os) { write_report_json(os, rep); });
        }
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const ConsistencyError& e) {
        std::cerr << "internal consistency failure: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal failure: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
