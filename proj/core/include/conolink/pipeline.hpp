#pragma once

#include <cstdint>
#include <vector>

#include "conolink/affinity.hpp"
#include "conolink/graph_builder.hpp"
#include "conolink/ingest.hpp"
#include "conolink/metrics.hpp"
#include "conolink/solver.hpp"
#include "conolink/stitcher.hpp"
#include "conolink/train.hpp"

namespace conolink {

struct TrackerConfig {
    WindowPlan window;
    BuilderConfig builder;
    AggregateConfig aggregate;
    ClipPlan clip;
    bool interpolate = true;
    unsigned threads = 1;
};

/// Checks every module config and that the affinity clip bound matches the clip plan.
void validate(const TrackerConfig& cfg);

struct ClipResult {
    std::vector<Tracklet> tracks;
    GraphStats stats;
};

/// Affinity -> frame association -> partial graph -> two-pass aggregation on one clip.
ClipResult track_clip(const DetectionSet& clip, const TrackerConfig& cfg, const AffinityScorer& affinity,
                      const EdgeScorer& edges);

struct SequenceResult {
    std::vector<Tracklet> tracks;
    /// Summed over clips.
    GraphStats stats;
    std::size_t clips = 0;
};

/// Runs track_clip over overlapping clips, stitches, and interpolates gaps.
SequenceResult track_sequence(const DetectionSet& dets, const TrackerConfig& cfg, const AffinityScorer& affinity,
                              const EdgeScorer& edges);

struct SampleConfig {
    /// Frames per training clip; clips tile the sequence without overlap.
    int clip_frames = 64;
    /// Probability of cutting a tracklet after each member when building pass 2 graphs.
    double fragment_rate = 0.15;
    std::uint64_t seed = 0;
};

void validate(const SampleConfig& cfg);

/// Labeled training graphs from a sequence with gt ids on every detection: per clip,
/// one pass 1 partial graph and one pass 2 graph over randomly fragmented tracker
/// tracklets. Graphs without edges are skipped.
std::vector<TrainingSample> build_training_samples(const DetectionSet& dets, const TrackerConfig& cfg,
                                                   const AffinityScorer& affinity, const SampleConfig& samples);

}  // namespace conolink
