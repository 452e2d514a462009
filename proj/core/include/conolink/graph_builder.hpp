#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "conolink/affinity.hpp"
#include "conolink/ingest.hpp"
#include "conolink/types.hpp"

namespace conolink {

struct BuilderConfig {
    int top_k = 5;
    double new_track_threshold = 0.3;
    int lookback = 32;
};

void validate(const BuilderConfig& cfg);

/// Candidate link between two detections, as local indices into the DetectionSet.
struct DetLink {
    std::size_t from = 0;
    std::size_t to = 0;
    bool operator==(const DetLink&) const = default;
    auto operator<=>(const DetLink&) const = default;
};

struct Association {
    std::vector<Tracklet> tracklets;
    std::vector<DetLink> links;  ///< Sorted, unique.
};

/// Frame-by-frame association over the accumulated affinity matrix.
///
/// Detections of the first frame each open a track. Every later frame is assigned
/// to the active tracks (those with a member in the lookback) by the Hungarian
/// method on -max(M-bar, M-hat); an assignment scoring below the new-track threshold
/// is rejected and the detection opens its own track. Each active track links its
/// last detection to its accepted detection and to the top-k frame detections by
/// M-bar.
Association associate_frames(const DetectionSet& dets, const AffinityMatrix& affinity, const BuilderConfig& cfg);

/// Partially connected composite-node graph.
///
/// Node i < dets.size() is the Det node of local detection i; Traj nodes (tracks
/// with at least two members) follow in tracklet order. Edges: the Det-Det links;
/// Det-Traj links from every detection outside a Traj node to each Traj node that
/// ends (or starts) within `lookback` frames before (after) it; Traj-Traj links
/// between every pair of Traj nodes with disjoint spans.
TrackGraph build_part_graph(const Association& association, const DetectionSet& dets, int lookback);

/// Graph over whole tracks: each tracklet is one node (Det kind for singletons) and
/// every temporally disjoint pair is linked, earlier node first.
TrackGraph build_traj_graph(const std::vector<Tracklet>& tracklets);

/// Reference fully connected detection graph: every pair of detections in different
/// frames. Only for small inputs.
TrackGraph build_fully_graph(const DetectionSet& dets);

/// Edge count of build_fully_graph without materializing it.
std::uint64_t fully_connected_edge_count(const DetectionSet& dets);

/// Fraction of consecutive same-identity detection pairs representable in the graph:
/// a direct edge between nodes containing the two detections, or both inside one
/// Traj node. Returns 1 when there are no such pairs.
double edge_coverage(const TrackGraph& graph, const DetectionSet& dets);

/// Label 1 iff the last detection of u and the first detection of v are consecutive
/// detections of one ground-truth identity. Requires gt ids on all members.
void label_edges(TrackGraph& graph);

/// Writes the line-oriented graph dump used by `graph-stats`.
void write_graph_text(const TrackGraph& graph, std::ostream& out);

}  // namespace conolink
