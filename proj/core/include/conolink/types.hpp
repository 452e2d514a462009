#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <tuple>
#include <variant>
#include <vector>

namespace conolink {

using Embedding = std::vector<double>;

/// Axis-aligned box in pixel coordinates. Width and height are positive.
struct BoundingBox {
    double x = 0.0;
    double y = 0.0;
    double w = 1.0;
    double h = 1.0;

    double area() const noexcept { return w * h; }
    double right() const noexcept { return x + w; }
    double bottom() const noexcept { return y + h; }

    bool operator==(const BoundingBox&) const = default;
};

/// Throws ValidationError unless w > 0, h > 0 and all coordinates are finite.
void validate(const BoundingBox& box);

inline constexpr std::int64_t kNoIndex = -1;

/// One detector output.
///
/// `index` is the position of the detection in its source DetectionSet and
/// identifies it across clips. Synthesized boxes (interpolation) carry kNoIndex.
struct Detection {
    int frame = 0;
    BoundingBox box;
    double confidence = 1.0;
    Embedding embedding;
    std::optional<int> gt_id;
    std::int64_t index = kNoIndex;
};

/// Time-ordered, single-identity run of detections.
class Tracklet {
public:
    Tracklet() = default;

    /// Throws ValidationError if `detections` is empty, not strictly increasing
    /// in frame, or has inconsistent embedding dimensions.
    Tracklet(int id, std::vector<Detection> detections);

    int id() const noexcept { return id_; }
    void set_id(int id) noexcept { id_ = id; }

    const std::vector<Detection>& detections() const noexcept { return detections_; }
    const Embedding& mean_embedding() const noexcept { return mean_embedding_; }
    int start_frame() const noexcept { return detections_.front().frame; }
    int end_frame() const noexcept { return detections_.back().frame; }
    std::size_t size() const noexcept { return detections_.size(); }
    bool empty() const noexcept { return detections_.empty(); }
    const Detection& front() const { return detections_.front(); }
    const Detection& back() const { return detections_.back(); }

private:
    int id_ = -1;
    std::vector<Detection> detections_;
    Embedding mean_embedding_;
};

/// Arithmetic mean of a set of equal-length embeddings. Empty input gives an empty vector.
Embedding mean_embedding(std::span<const Detection> detections);

enum class NodeKind { Det, Traj };

/// A graph node: either a single detection or an aggregated tracklet.
struct CompositeNode {
    NodeKind kind = NodeKind::Det;
    std::variant<Detection, Tracklet> payload;
    std::size_t node_index = 0;

    int start_frame() const;
    int end_frame() const;
    const BoundingBox& first_box() const;
    const BoundingBox& last_box() const;
    const Embedding& embedding() const;
    /// Source indices of every member detection.
    std::vector<std::int64_t> member_indices() const;
    std::size_t member_count() const;
};

CompositeNode make_det_node(Detection det, std::size_t node_index);
CompositeNode make_traj_node(Tracklet track, std::size_t node_index);

enum class EdgeKind { DetDet, DetTraj, TrajTraj };

const char* to_string(NodeKind kind) noexcept;
const char* to_string(EdgeKind kind) noexcept;

inline constexpr std::size_t kEdgeFeatureDim = 6;

/// Directed edge from the temporally earlier node `u` to the later node `v`.
struct Edge {
    std::size_t u = 0;
    std::size_t v = 0;
    EdgeKind kind = EdgeKind::DetDet;
    std::vector<double> init_features;
    std::optional<double> score;
    std::optional<int> label;
};

class TrackGraph {
public:
    std::size_t add_node(CompositeNode node);
    /// Throws ValidationError on a missing endpoint, temporal order violation
    /// or duplicate (u, v, kind) triple.
    void add_edge(Edge edge);

    const std::vector<CompositeNode>& nodes() const noexcept { return nodes_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    std::vector<Edge>& mutable_edges() noexcept { return edges_; }
    const std::map<int, std::vector<std::size_t>>& frame_index() const noexcept { return frame_index_; }

    bool has_edge(std::size_t u, std::size_t v, EdgeKind kind) const;
    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::size_t edge_count() const noexcept { return edges_.size(); }

    /// Copy of the graph with node i stored at position perm[i]. Edge order is kept.
    TrackGraph permuted(std::span<const std::size_t> perm) const;

private:
    std::vector<CompositeNode> nodes_;
    std::vector<Edge> edges_;
    std::map<int, std::vector<std::size_t>> frame_index_;
    std::map<std::tuple<std::size_t, std::size_t, int>, std::size_t> edge_lookup_;
};

}  // namespace conolink
