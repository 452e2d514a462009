#include "conolink_cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "conolink/config.hpp"
#include "conolink/error.hpp"
#include "conolink/pipeline.hpp"

namespace conolink::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string dashed(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
}

/// `--config FILE` plus one `--<key>` flag per config key.
struct ConfigOptions {
    std::string file;
    std::map<std::string, std::string> raw;
    std::map<std::string, CLI::Option*> options;

    void attach(CLI::App* app) {
        app->add_option("--config", file, "key=value config file")->check(CLI::ExistingFile);
        for (const auto& key : config_keys()) {
            options[key] = app->add_option("--" + dashed(key), raw[key], "overrides config key " + key);
        }
    }

    RunConfig load() const {
        RunConfig cfg;
        if (!file.empty()) conolink::apply(cfg, read_config_file(file));
        ConfigValues flags;
        for (const auto& [key, option] : options) {
            if (option->count() > 0) flags[key] = raw.at(key);
        }
        conolink::apply(cfg, flags);
        validate(cfg);
        return cfg;
    }
};

struct InputOptions {
    std::string det;
    std::string embeddings;
    std::string gt;

    void attach(CLI::App* app, bool det_required) {
        auto* det_opt = app->add_option("--det", det, "MOT detection file")->check(CLI::ExistingFile);
        if (det_required) det_opt->required();
        app->add_option("--embeddings", embeddings, "embedding sidecar for --det")->check(CLI::ExistingFile);
        app->add_option("--gt", gt, "MOT ground-truth file; attaches gt ids to detections")
            ->check(CLI::ExistingFile);
    }

    DetectionSet load(const RunConfig& cfg) const {
        std::optional<fs::path> emb;
        if (!embeddings.empty()) emb = embeddings;
        DetectionSet dets = parse_mot(det, emb, cfg.mpn.embed_dim);
        if (!gt.empty()) {
            const DetectionSet gt_rows = parse_mot(gt, std::nullopt, 1);
            dets = attach_ground_truth(dets, tracks_from_ids(gt_rows));
        }
        return dets;
    }
};

void write_stats(const GraphStats& s, std::ostream& out) {
    out << "node_count=" << s.node_count << '\n'
        << "det_nodes=" << s.det_nodes << '\n'
        << "traj_nodes=" << s.traj_nodes << '\n'
        << "edge_count=" << s.edge_count << '\n'
        << "det_det_edges=" << s.det_det << '\n'
        << "det_traj_edges=" << s.det_traj << '\n'
        << "traj_traj_edges=" << s.traj_traj << '\n';
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

// ---------------------------------------------------------------------------

struct SynthCommand {
    ScenarioSpec spec;
    int occlusions_per_object = 0;
    int max_occlusion = 10;
    std::string out_dir;

    void attach(CLI::App* app) {
        app->add_option("--objects", spec.n_objects, "number of objects");
        app->add_option("--frames", spec.n_frames, "number of frames");
        app->add_option("--seed", spec.seed, "random seed");
        app->add_option("--noise", spec.embedding_noise_sigma, "embedding noise sigma");
        app->add_option("--miss-rate", spec.miss_rate, "per-detection drop probability");
        app->add_option("--direction-change", spec.direction_change_prob, "per-frame heading change probability");
        app->add_option("--occlusions", occlusions_per_object, "occlusion windows per object");
        app->add_option("--max-occlusion", max_occlusion, "longest occlusion in frames");
        app->add_option("--embedding-dim", spec.embedding_dim, "embedding dimension");
        app->add_option("--width", spec.arena_width, "arena width");
        app->add_option("--height", spec.arena_height, "arena height");
        app->add_option("--out", out_dir, "output directory")->required();
    }

    int run(std::ostream& out, std::ostream&) {
        validate(spec);
        if (occlusions_per_object < 0 || max_occlusion < 1) {
            throw ValidationError("occlusion count must be >= 0 and max occlusion >= 1");
        }
        if (occlusions_per_object > 0) {
            spec.occlusions = random_occlusions(spec.n_objects, spec.n_frames, occlusions_per_object, max_occlusion,
                                                spec.seed ^ 0x9e3779b97f4a7c15ULL);
        }
        const Scenario scenario = simulate(spec);
        fs::create_directories(out_dir);
        const fs::path dir(out_dir);
        write_mot(scenario.ground_truth, dir / "gt.txt");
        write_detections(scenario.detections, dir / "det.txt", false);
        write_embeddings(scenario.detections.detections(), dir / "det.emb");
        out << "detections=" << scenario.detections.size() << '\n' << "objects=" << spec.n_objects << '\n';
        return kExitOk;
    }
};

struct TrackCommand {
    ConfigOptions config;
    InputOptions input;
    std::string params;
    std::string out_path;
    bool require_params = false;
    bool oracle = false;

    void attach(CLI::App* app) {
        config.attach(app);
        input.attach(app, true);
        app->add_option("--params", params, "trained network checkpoint");
        app->add_flag("--require-params", require_params, "fail instead of falling back to hand-crafted scoring");
        app->add_flag("--oracle", oracle, "score with ground-truth ids (needs ids in --det or --gt)");
        app->add_option("--out", out_path, "result MOT file")->required();
    }

    int run(std::ostream& out, std::ostream& err) {
        const auto start = Clock::now();
        const RunConfig cfg = config.load();
        if (require_params && params.empty() && !oracle) {
            throw ValidationError("--require-params given but no --params checkpoint");
        }
        const DetectionSet dets = input.load(cfg);

        std::unique_ptr<AffinityScorer> affinity;
        std::unique_ptr<EdgeScorer> edges;
        std::string mode;
        if (oracle) {
            if (!dets.has_gt()) throw ValidationError("--oracle needs a gt id on every detection");
            affinity = std::make_unique<OracleScorer>();
            edges = std::make_unique<OracleEdgeScorer>();
            mode = "oracle";
        } else if (!params.empty()) {
            MpnParams loaded = load_checkpoint(params);
            if (loaded.config.embed_dim != dets.embedding_dim()) {
                throw LengthError("checkpoint expects embeddings of dimension " +
                                  std::to_string(loaded.config.embed_dim) + ", detections have " +
                                  std::to_string(dets.embedding_dim()));
            }
            affinity = std::make_unique<CosineScorer>();
            edges = std::make_unique<MpnEdgeScorer>(std::move(loaded));
            mode = "network";
        } else {
            affinity = std::make_unique<CosineScorer>();
            edges = std::make_unique<HandcraftedEdgeScorer>();
            mode = "handcrafted";
        }

        const SequenceResult result = track_sequence(dets, cfg.tracker, *affinity, *edges);
        write_mot(result.tracks, out_path);
        out << "scorer=" << mode << '\n' << "clips=" << result.clips << '\n' << "tracks=" << result.tracks.size() << '\n';
        write_stats(result.stats, out);
        err << "track: " << dets.size() << " detections in " << fmt(seconds_since(start)) << " s\n";
        return kExitOk;
    }
};

struct TrainCommand {
    ConfigOptions config;
    InputOptions input;
    std::string out_path;

    void attach(CLI::App* app) {
        config.attach(app);
        input.attach(app, false);
        app->add_option("--out", out_path, "checkpoint to write")->required();
    }

    int run(std::ostream& out, std::ostream& err) {
        const auto start = Clock::now();
        RunConfig cfg = config.load();
        if (input.gt.empty()) throw ValidationError("train needs --gt");

        DetectionSet labeled;
        if (input.det.empty()) {
            // Train directly on the ground-truth boxes.
            std::optional<fs::path> emb;
            if (!input.embeddings.empty()) emb = input.embeddings;
            labeled = parse_mot(input.gt, emb, cfg.mpn.embed_dim);
        } else {
            const DetectionSet attached = input.load(cfg);
            std::vector<Detection> kept;
            for (const auto& det : attached.detections()) {
                if (det.gt_id) kept.push_back(det);
            }
            labeled = DetectionSet::from(std::move(kept), attached.n_frames());
        }
        if (!labeled.has_gt()) throw ValidationError("training data carries no gt ids");
        cfg.mpn.embed_dim = labeled.embedding_dim();

        const auto samples = build_training_samples(labeled, cfg.tracker, CosineScorer{}, cfg.samples);
        if (samples.empty()) throw ValidationError("training data produced no labeled edges");
        TrainReport report;
        const MpnParams trained =
            train(samples, MpnParams::initialize(cfg.mpn, cfg.seed), cfg.schedule, &report);
        save_checkpoint(trained, out_path);

        out << "samples=" << samples.size() << '\n' << "iterations=" << report.loss_curve.size() << '\n';
        const auto& curve = report.loss_curve;
        if (!curve.empty()) {
            const std::size_t every = std::max<std::size_t>(1, curve.size() / 10);
            for (std::size_t i = 0; i < curve.size(); i += every) out << "loss[" << i << "]=" << fmt(curve[i]) << '\n';
            out << "final_loss=" << fmt(curve.back()) << '\n'
                << "min_loss=" << fmt(*std::min_element(curve.begin(), curve.end())) << '\n';
        }
        err << "train: " << curve.size() << " iterations in " << fmt(seconds_since(start)) << " s\n";
        return kExitOk;
    }
};

struct EvalCommand {
    std::string pred;
    std::string gt;
    bool kv = false;
    double gate = kDefaultIouGate;

    void attach(CLI::App* app) {
        app->add_option("--pred", pred, "result MOT file")->required()->check(CLI::ExistingFile);
        app->add_option("--gt", gt, "ground-truth MOT file")->required()->check(CLI::ExistingFile);
        app->add_flag("--kv", kv, "machine-readable key=value output");
        app->add_option("--iou-gate", gate, "IoU needed for a match");
    }

    int run(std::ostream& out, std::ostream& err) {
        if (!(gate > 0.0 && gate <= 1.0)) throw ValidationError("--iou-gate must lie in (0, 1]");
        const auto pred_tracks = tracks_from_ids(parse_mot(pred, std::nullopt, 1));
        const auto gt_tracks = tracks_from_ids(parse_mot(gt, std::nullopt, 1));
        const EvalReport report = evaluate(pred_tracks, gt_tracks, gate);
        if (report.frame_range_mismatch) err << "warning: prediction frames fall outside the ground-truth range\n";
        if (kv) {
            write_report_kv(report, out);
        } else {
            write_report_table(report, out);
        }
        return kExitOk;
    }
};

struct GraphStatsCommand {
    ConfigOptions config;
    InputOptions input;
    std::string out_path;
    bool oracle = false;

    void attach(CLI::App* app) {
        config.attach(app);
        input.attach(app, true);
        app->add_flag("--oracle", oracle, "use ground-truth affinity");
        app->add_option("--out", out_path, "write the graph dump here instead of stdout");
    }

    int run(std::ostream& out, std::ostream&) {
        const RunConfig cfg = config.load();
        const DetectionSet dets = input.load(cfg);
        const DetectionSet clip = dets.slice(dets.first_frame(), dets.first_frame() + cfg.tracker.clip.clip_len);
        std::unique_ptr<AffinityScorer> affinity;
        if (oracle) {
            if (!clip.has_gt()) throw ValidationError("--oracle needs a gt id on every detection");
            affinity = std::make_unique<OracleScorer>();
        } else {
            affinity = std::make_unique<CosineScorer>();
        }
        const AffinityMatrix matrix = accumulate_affinity(clip, cfg.tracker.window, *affinity, cfg.tracker.threads);
        const Association assoc = associate_frames(clip, matrix, cfg.tracker.builder);
        const TrackGraph graph = build_part_graph(assoc, clip, cfg.tracker.builder.lookback);

        if (out_path.empty()) {
            write_graph_text(graph, out);
        } else {
            std::ofstream file(out_path, std::ios::binary);
            if (!file) throw IoError("cannot write " + out_path);
            write_graph_text(graph, file);
            write_stats(graph_stats(graph), out);
            out << "fully_connected_edges=" << fully_connected_edge_count(clip) << '\n';
            if (clip.has_gt()) out << "coverage=" << fmt(edge_coverage(graph, clip)) << '\n';
        }
        return kExitOk;
    }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Composite-node multi-object tracking tools", "conolink"};
    app.require_subcommand(1);
    SynthCommand synth;
    TrackCommand track;
    TrainCommand train_cmd;
    EvalCommand eval;
    GraphStatsCommand graph;
    synth.attach(app.add_subcommand("synth", "write a synthetic scenario (gt.txt, det.txt, det.emb)"));
    track.attach(app.add_subcommand("track", "track a detection file"));
    train_cmd.attach(app.add_subcommand("train", "train the edge classifier"));
    eval.attach(app.add_subcommand("eval", "score a result file against ground truth"));
    graph.attach(app.add_subcommand("graph-stats", "dump the first clip's tracking graph"));

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        if (name == "synth") return synth.run(out, err);
        if (name == "track") return track.run(out, err);
        if (name == "train") return train_cmd.run(out, err);
        if (name == "eval") return eval.run(out, err);
        return graph.run(out, err);
    } catch (const ValidationError& e) {
        err << name << ": " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        err << name << ": " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace conolink::cli
