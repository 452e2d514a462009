#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "conolink/types.hpp"

namespace conolink {

inline constexpr double kDefaultIouGate = 0.5;

/// One matched (gt id, pred id) pair in a frame.
struct FramePair {
    int gt_id = 0;
    int pred_id = 0;
    double iou = 0.0;
};

struct FrameMatch {
    int frame = 0;
    std::vector<FramePair> pairs;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t ids = 0;
};

/// CLEAR-MOT correspondence over all frames of either set.
struct Correspondence {
    std::vector<FrameMatch> frames;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t ids = 0;
    std::size_t gt_count = 0;
};

/// Per frame, keeps each gt track's previous partner when it is present and still
/// at or above the gate, then matches the rest by the Hungarian method on IoU with
/// pairs below the gate excluded. An identity switch is counted when a gt track
/// gets matched to a different pred id than at its last match.
Correspondence match_frames(std::span<const Tracklet> pred, std::span<const Tracklet> gt,
                            double iou_gate = kDefaultIouGate);

/// 1 - (FN + FP + IDS) / GT; empty when there are no gt boxes.
std::optional<double> mota(const Correspondence& corr);

struct IdentityCounts {
    std::size_t idtp = 0;
    std::size_t idfp = 0;
    std::size_t idfn = 0;
};

/// Global one-to-one identity matching maximizing the number of frames where the
/// paired boxes overlap at or above the gate.
IdentityCounts identity_counts(std::span<const Tracklet> pred, std::span<const Tracklet> gt,
                               double iou_gate = kDefaultIouGate);

/// 2 IDTP / (2 IDTP + IDFP + IDFN); 1.0 when both sets are empty.
double idf1(std::span<const Tracklet> pred, std::span<const Tracklet> gt, double iou_gate = kDefaultIouGate);

struct GraphStats {
    std::size_t node_count = 0;
    std::size_t det_nodes = 0;
    std::size_t traj_nodes = 0;
    std::size_t edge_count = 0;
    std::size_t det_det = 0;
    std::size_t det_traj = 0;
    std::size_t traj_traj = 0;

    GraphStats& operator+=(const GraphStats& other);
};

GraphStats graph_stats(const TrackGraph& graph);

struct EvalReport {
    std::optional<double> mota;
    double idf1 = 1.0;
    std::size_t ids = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t gt_count = 0;
    std::size_t edge_count = 0;
    std::size_t node_count = 0;
    std::optional<double> coverage;
    /// Set when prediction frames fall outside the gt frame range.
    bool frame_range_mismatch = false;
};

EvalReport evaluate(std::span<const Tracklet> pred, std::span<const Tracklet> gt, double iou_gate = kDefaultIouGate);

void write_report_table(const EvalReport& report, std::ostream& out);
/// One `key=value` per line, fixed key order.
void write_report_kv(const EvalReport& report, std::ostream& out);

}  // namespace conolink
