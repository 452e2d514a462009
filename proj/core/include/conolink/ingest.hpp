#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "conolink/types.hpp"

namespace conolink {

inline constexpr std::size_t kDefaultEmbeddingDim = 16;

/// Detections of one sequence (or one clip of it), grouped by frame.
///
/// `detections` is sorted by frame and, within a frame, canonically by
/// (x, y, w, h, confidence) so downstream results do not depend on input row order.
/// Frames lie in [first_frame, first_frame + n_frames).
class DetectionSet {
public:
    DetectionSet() = default;

    /// Canonically orders `detections`, assigns Detection::index = position, and
    /// validates boxes, confidences and embedding dimensions. `n_frames` must cover
    /// every detection frame.
    static DetectionSet from(std::vector<Detection> detections, int n_frames);

    /// Detections with frame in [first, last), keeping their original `index`.
    DetectionSet slice(int first, int last) const;

    const std::vector<Detection>& detections() const noexcept { return detections_; }
    std::size_t size() const noexcept { return detections_.size(); }
    bool empty() const noexcept { return detections_.empty(); }
    int n_frames() const noexcept { return n_frames_; }
    int first_frame() const noexcept { return first_frame_; }
    int end_frame() const noexcept { return first_frame_ + n_frames_; }
    bool has_gt() const noexcept { return has_gt_; }
    std::size_t embedding_dim() const noexcept {
        return detections_.empty() ? 0 : detections_.front().embedding.size();
    }

    /// Local positions [begin, end) of the detections in `frame`.
    std::pair<std::size_t, std::size_t> frame_range(int frame) const;
    std::span<const Detection> frame(int frame) const;

private:
    std::vector<Detection> detections_;
    std::vector<std::size_t> frame_offsets_;
    int first_frame_ = 0;
    int n_frames_ = 0;
    bool has_gt_ = false;

    void rebuild_index();
};

// ---------------------------------------------------------------------------
// MOTChallenge text format: frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z
// with 1-based frames. Embedding sidecar: little-endian u64 rows, u64 dim, then
// rows*dim little-endian float32 values in detection-file row order.

/// Parses a MOT file. Without a sidecar, each row gets a deterministic
/// pseudo-embedding of dimension `pseudo_dim` derived from (frame, box).
DetectionSet parse_mot(const std::filesystem::path& det_path,
                       const std::optional<std::filesystem::path>& embed_path = std::nullopt,
                       std::size_t pseudo_dim = kDefaultEmbeddingDim);

/// Writes tracks as MOT rows sorted by (frame, id).
void write_mot(std::span<const Tracklet> tracks, const std::filesystem::path& path);

/// Writes detections in set order. The id column carries gt_id when `with_ids`
/// is set and the id is known, otherwise -1.
void write_detections(const DetectionSet& dets, const std::filesystem::path& path, bool with_ids);

void write_embeddings(std::span<const Detection> detections, const std::filesystem::path& path);

struct EmbeddingTable {
    std::uint64_t rows = 0;
    std::uint64_t dim = 0;
    std::vector<float> values;
};

EmbeddingTable read_embeddings(const std::filesystem::path& path);

/// Unit vector derived from a hash of (frame, box). Not discriminative.
Embedding pseudo_embedding(int frame, const BoundingBox& box, std::size_t dim);

// ---------------------------------------------------------------------------
// Synthetic scenarios.

struct Occlusion {
    int start = 0;
    int duration = 0;
};

struct ScenarioSpec {
    int n_objects = 10;
    int n_frames = 200;
    double arena_width = 640.0;
    double arena_height = 480.0;
    double min_speed = 1.0;
    double max_speed = 4.0;
    double direction_change_prob = 0.0;
    /// Indexed by object; missing entries mean no occlusion.
    std::vector<std::vector<Occlusion>> occlusions;
    double miss_rate = 0.0;
    double embedding_noise_sigma = 0.0;
    std::size_t embedding_dim = kDefaultEmbeddingDim;
    std::uint64_t seed = 0;
};

void validate(const ScenarioSpec& spec);

struct Scenario {
    /// Surviving detections, each carrying gt_id.
    DetectionSet detections;
    /// Complete ground-truth trajectories, one per object, one box per frame.
    std::vector<Tracklet> ground_truth;
};

Scenario simulate(const ScenarioSpec& spec);
DetectionSet synthesize(const ScenarioSpec& spec);

/// Up to `per_object` random occlusion windows of length 1..max_duration per object.
std::vector<std::vector<Occlusion>> random_occlusions(int n_objects, int n_frames, int per_object,
                                                      int max_duration, std::uint64_t seed);

/// Copies gt_id onto each detection from the ground-truth box of the same frame with
/// the highest IoU >= `iou_gate` (one-to-one per frame). Unmatched detections lose gt_id.
DetectionSet attach_ground_truth(const DetectionSet& dets, std::span<const Tracklet> ground_truth,
                                 double iou_gate = 0.5);

/// Groups a parsed ground-truth file by id into tracklets.
std::vector<Tracklet> tracks_from_ids(const DetectionSet& dets);

}  // namespace conolink
