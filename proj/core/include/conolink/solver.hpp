#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "conolink/mpn.hpp"
#include "conolink/types.hpp"

namespace conolink {

struct ScoredEdge {
    std::size_t u = 0;
    std::size_t v = 0;
    double score = 0.0;
};

/// Edges of a DAG (u earlier than v) with classification scores in [0, 1].
struct RoundingProblem {
    std::size_t node_count = 0;
    std::vector<ScoredEdge> edges;
};

void validate(const RoundingProblem& problem);

/// One 0/1 label per edge, in edge order.
using Labeling = std::vector<std::uint8_t>;

inline constexpr std::size_t kExactRoundMaxEdges = 20;

/// ||labels - scores||^2.
double rounding_objective(const RoundingProblem& problem, const Labeling& labels);

/// True iff every node has at most one active incoming and one active outgoing edge.
bool is_flow_feasible(const RoundingProblem& problem, const Labeling& labels);

/// Edges visited by (score desc, u asc, v asc); an edge is activated when its score
/// exceeds `epsilon` and neither its source's outgoing nor its target's incoming
/// budget is used.
Labeling greedy_round(const RoundingProblem& problem, double epsilon);

/// Exhaustive search for the flow-feasible labeling minimizing ||labels - scores||^2
/// over edges scoring above `epsilon`. Among equal optima the labeling that is
/// lexicographically largest in edge order wins. At most kExactRoundMaxEdges edges.
Labeling exact_round(const RoundingProblem& problem, double epsilon);

struct FrameSpan {
    int start = 0;
    int end = 0;
};

/// Groups nodes over positive edges in (score desc, u asc, v asc) order, refusing any
/// merge that would put two nodes with overlapping spans in one group. Ids are
/// numbered 0.. by the smallest node index of each group.
std::vector<int> connected_components_ids(std::span<const FrameSpan> nodes, std::span<const ScoredEdge> positive);

/// Produces one score in [0, 1] per edge of a graph.
class EdgeScorer {
public:
    virtual ~EdgeScorer() = default;
    virtual std::vector<double> score(const TrackGraph& graph) const = 0;
};

class MpnEdgeScorer final : public EdgeScorer {
public:
    explicit MpnEdgeScorer(MpnParams params) : params_(std::move(params)) {}
    std::vector<double> score(const TrackGraph& graph) const override;
    const MpnParams& params() const noexcept { return params_; }

private:
    MpnParams params_;
};

/// 1 for edges joining consecutive detections of one ground-truth identity, else 0.
class OracleEdgeScorer final : public EdgeScorer {
public:
    std::vector<double> score(const TrackGraph& graph) const override;
};

/// Fixed logistic model on the init edge features: appearance distance, relative
/// displacement, size change and frame gap all lower the score.
class HandcraftedEdgeScorer final : public EdgeScorer {
public:
    std::vector<double> score(const TrackGraph& graph) const override;
};

/// Writes scorer output into every edge's `score`.
void score_graph(TrackGraph& graph, const EdgeScorer& scorer);

enum class FirstPassMode {
    /// Greedy rounding of the scored Det-Det links.
    Rounding,
    /// Identities of the frame-by-frame tracker stored in the graph's Traj nodes.
    Tracker,
};

struct AggregateConfig {
    double epsilon = 0.5;
    /// Upper bound on trajectory-level passes; stops early when nothing merges.
    int traj_passes = 1;
    FirstPassMode first_pass = FirstPassMode::Rounding;
};

void validate(const AggregateConfig& cfg);

struct AggregateResult {
    /// Final identities, numbered from 1 in order of (start frame, first index).
    std::vector<Tracklet> tracks;
    /// Identities after the first pass, same numbering rule.
    std::vector<Tracklet> first_pass_tracks;
    std::size_t merges = 0;
};

/// Two-pass graph aggregation. Pass 1 scores the partial graph and derives identities
/// over detection-level links; pass 2 turns each identity into a trajectory node,
/// links all temporally disjoint pairs, re-scores with the same scorer, keeps edges
/// above epsilon and merges non-overlapping connected groups.
AggregateResult aggregate(const TrackGraph& graph, const EdgeScorer& scorer, const AggregateConfig& cfg);

/// Detection index -> track id.
std::map<std::int64_t, int> ids_by_index(std::span<const Tracklet> tracks);

}  // namespace conolink
