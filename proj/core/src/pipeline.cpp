#include "conolink/pipeline.hpp"

#include <mutex>
#include <random>

#include "conolink/error.hpp"

namespace conolink {

void validate(const TrackerConfig& cfg) {
    validate(cfg.window);
    validate(cfg.builder);
    validate(cfg.aggregate);
    validate(cfg.clip);
    if (cfg.window.clip_len != cfg.clip.clip_len) {
        throw ValidationError("affinity clip length must equal the clip plan length");
    }
    if (cfg.threads == 0) throw ValidationError("threads must be >= 1");
}

ClipResult track_clip(const DetectionSet& clip, const TrackerConfig& cfg, const AffinityScorer& affinity,
                      const EdgeScorer& edges) {
    ClipResult out;
    if (clip.empty()) return out;
    const AffinityMatrix matrix = accumulate_affinity(clip, cfg.window, affinity, cfg.threads);
    const Association assoc = associate_frames(clip, matrix, cfg.builder);
    const TrackGraph graph = build_part_graph(assoc, clip, cfg.builder.lookback);
    out.stats = graph_stats(graph);
    out.tracks = aggregate(graph, edges, cfg.aggregate).tracks;
    return out;
}

SequenceResult track_sequence(const DetectionSet& dets, const TrackerConfig& cfg, const AffinityScorer& affinity,
                              const EdgeScorer& edges) {
    validate(cfg);
    SequenceResult out;
    std::mutex stats_mutex;
    // Clip-level parallelism replaces window-level parallelism inside each clip.
    TrackerConfig inner = cfg;
    inner.threads = 1;
    const ClipTracker tracker = [&](const DetectionSet& clip) {
        ClipResult r = track_clip(clip, inner, affinity, edges);
        const std::lock_guard lock(stats_mutex);
        out.stats += r.stats;
        ++out.clips;
        return std::move(r.tracks);
    };
    out.tracks = run_clipped(dets, cfg.clip, tracker, cfg.interpolate, cfg.threads);
    return out;
}

void validate(const SampleConfig& cfg) {
    if (cfg.clip_frames < 2) throw ValidationError("training clip_frames must be >= 2");
    if (!(cfg.fragment_rate >= 0.0 && cfg.fragment_rate < 1.0)) {
        throw ValidationError("fragment_rate must lie in [0, 1)");
    }
}

namespace {

std::vector<Tracklet> fragment(const std::vector<Tracklet>& tracks, double rate, std::mt19937_64& rng) {
    std::bernoulli_distribution cut(rate);
    std::vector<Tracklet> out;
    int next_id = 0;
    for (const auto& t : tracks) {
        std::vector<Detection> piece;
        for (std::size_t i = 0; i < t.size(); ++i) {
            piece.push_back(t.detections()[i]);
            if (i + 1 < t.size() && cut(rng)) {
                out.emplace_back(next_id++, std::move(piece));
                piece.clear();
            }
        }
        out.emplace_back(next_id++, std::move(piece));
    }
    return out;
}

}  // namespace

std::vector<TrainingSample> build_training_samples(const DetectionSet& dets, const TrackerConfig& cfg,
                                                   const AffinityScorer& affinity, const SampleConfig& samples) {
    validate(cfg);
    validate(samples);
    if (!dets.has_gt()) throw ValidationError("training requires a gt id on every detection");
    std::mt19937_64 rng(samples.seed);
    std::vector<TrainingSample> out;
    for (int first = dets.first_frame(); first < dets.end_frame(); first += samples.clip_frames) {
        const DetectionSet clip = dets.slice(first, std::min(first + samples.clip_frames, dets.end_frame()));
        if (clip.size() < 2) continue;
        const AffinityMatrix matrix = accumulate_affinity(clip, cfg.window, affinity, cfg.threads);
        const Association assoc = associate_frames(clip, matrix, cfg.builder);

        TrackGraph part = build_part_graph(assoc, clip, cfg.builder.lookback);
        label_edges(part);
        if (part.edge_count() > 0) out.push_back({GraphTensors::from(part), 1});

        TrackGraph traj = build_traj_graph(fragment(assoc.tracklets, samples.fragment_rate, rng));
        label_edges(traj);
        if (traj.edge_count() > 0) out.push_back({GraphTensors::from(traj), 2});
    }
    return out;
}

}  // namespace conolink
