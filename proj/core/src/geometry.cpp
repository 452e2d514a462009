#include "conolink/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "conolink/error.hpp"

namespace conolink {

void validate(const BoundingBox& box) {
    if (!std::isfinite(box.x) || !std::isfinite(box.y) || !std::isfinite(box.w) ||
        !std::isfinite(box.h)) {
        throw ValidationError("bounding box has non-finite coordinates");
    }
    if (box.w <= 0.0 || box.h <= 0.0) {
        throw ValidationError("bounding box must have positive width and height");
    }
}

Embedding mean_embedding(std::span<const Detection> detections) {
    if (detections.empty()) return {};
    Embedding mean(detections.front().embedding.size(), 0.0);
    for (const auto& det : detections) {
        for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += det.embedding[k];
    }
    const double n = static_cast<double>(detections.size());
    for (auto& value : mean) value /= n;
    return mean;
}

Tracklet::Tracklet(int id, std::vector<Detection> detections)
    : id_(id), detections_(std::move(detections)) {
    if (detections_.empty()) throw ValidationError("tracklet must contain at least one detection");
    const std::size_t dim = detections_.front().embedding.size();
    for (std::size_t i = 0; i < detections_.size(); ++i) {
        if (detections_[i].embedding.size() != dim) {
            throw ValidationError("tracklet members have inconsistent embedding dimensions");
        }
        if (i > 0 && detections_[i].frame <= detections_[i - 1].frame) {
            throw ValidationError("tracklet detections must be strictly increasing in frame");
        }
    }
    mean_embedding_ = conolink::mean_embedding(detections_);
}

int CompositeNode::start_frame() const {
    if (const auto* det = std::get_if<Detection>(&payload)) return det->frame;
    return std::get<Tracklet>(payload).start_frame();
}

int CompositeNode::end_frame() const {
    if (const auto* det = std::get_if<Detection>(&payload)) return det->frame;
    return std::get<Tracklet>(payload).end_frame();
}

const BoundingBox& CompositeNode::first_box() const {
    if (const auto* det = std::get_if<Detection>(&payload)) return det->box;
    return std::get<Tracklet>(payload).front().box;
}

const BoundingBox& CompositeNode::last_box() const {
    if (const auto* det = std::get_if<Detection>(&payload)) return det->box;
    return std::get<Tracklet>(payload).back().box;
}

const Embedding& CompositeNode::embedding() const {
    if (const auto* det = std::get_if<Detection>(&payload)) return det->embedding;
    return std::get<Tracklet>(payload).mean_embedding();
}

std::vector<std::int64_t> CompositeNode::member_indices() const {
    if (const auto* det = std::get_if<Detection>(&payload)) return {det->index};
    std::vector<std::int64_t> out;
    for (const auto& det : std::get<Tracklet>(payload).detections()) out.push_back(det.index);
    return out;
}

std::size_t CompositeNode::member_count() const {
    if (std::holds_alternative<Detection>(payload)) return 1;
    return std::get<Tracklet>(payload).size();
}

CompositeNode make_det_node(Detection det, std::size_t node_index) {
    return CompositeNode{NodeKind::Det, std::move(det), node_index};
}

CompositeNode make_traj_node(Tracklet track, std::size_t node_index) {
    return CompositeNode{NodeKind::Traj, std::move(track), node_index};
}

const char* to_string(NodeKind kind) noexcept {
    return kind == NodeKind::Det ? "Det" : "Traj";
}

const char* to_string(EdgeKind kind) noexcept {
    switch (kind) {
        case EdgeKind::DetDet: return "DetDet";
        case EdgeKind::DetTraj: return "DetTraj";
        case EdgeKind::TrajTraj: return "TrajTraj";
    }
    return "?";
}

std::size_t TrackGraph::add_node(CompositeNode node) {
    const std::size_t index = nodes_.size();
    node.node_index = index;
    if (const auto* det = std::get_if<Detection>(&node.payload)) {
        frame_index_[det->frame].push_back(index);
    } else {
        // Traj nodes are indexed at every frame where they own a detection.
        for (const auto& member : std::get<Tracklet>(node.payload).detections()) {
            frame_index_[member.frame].push_back(index);
        }
    }
    nodes_.push_back(std::move(node));
    return index;
}

void TrackGraph::add_edge(Edge edge) {
    if (edge.u >= nodes_.size() || edge.v >= nodes_.size()) {
        throw ValidationError("edge endpoint does not exist");
    }
    if (edge.u == edge.v) throw ValidationError("self loops are not allowed");
    if (nodes_[edge.u].end_frame() >= nodes_[edge.v].start_frame()) {
        throw ValidationError("edge violates temporal ordering (u must end before v starts)");
    }
    if (edge.score && (*edge.score < 0.0 || *edge.score > 1.0)) {
        throw ValidationError("edge score outside [0, 1]");
    }
    const auto key = std::make_tuple(edge.u, edge.v, static_cast<int>(edge.kind));
    if (edge_lookup_.contains(key)) throw ValidationError("duplicate edge");
    edge_lookup_.emplace(key, edges_.size());
    edges_.push_back(std::move(edge));
}

bool TrackGraph::has_edge(std::size_t u, std::size_t v, EdgeKind kind) const {
    return edge_lookup_.contains(std::make_tuple(u, v, static_cast<int>(kind)));
}

TrackGraph TrackGraph::permuted(std::span<const std::size_t> perm) const {
    if (perm.size() != nodes_.size()) throw LengthError("permutation size mismatch");
    std::vector<const CompositeNode*> slots(nodes_.size(), nullptr);
    for (std::size_t i = 0; i < perm.size(); ++i) {
        if (perm[i] >= slots.size() || slots[perm[i]] != nullptr) {
            throw ValidationError("not a permutation");
        }
        slots[perm[i]] = &nodes_[i];
    }
    TrackGraph out;
    for (const auto* node : slots) out.add_node(*node);
    for (Edge edge : edges_) {
        edge.u = perm[edge.u];
        edge.v = perm[edge.v];
        out.add_edge(std::move(edge));
    }
    return out;
}

double iou(const BoundingBox& a, const BoundingBox& b) noexcept {
    const double ix = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

double temporal_iou(int a_start, int a_end, int b_start, int b_end) noexcept {
    const int inter = std::min(a_end, b_end) - std::max(a_start, b_start) + 1;
    if (inter <= 0) return 0.0;
    const int uni = std::max(a_end, b_end) - std::min(a_start, b_start) + 1;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double temporal_iou(const Tracklet& a, const Tracklet& b) noexcept {
    return temporal_iou(a.start_frame(), a.end_frame(), b.start_frame(), b.end_frame());
}

std::vector<double> init_edge_features(const CompositeNode& u, const CompositeNode& v) {
    const BoundingBox& last = u.last_box();
    const BoundingBox& first = v.first_box();
    const double height_sum = last.h + first.h;
    const auto& fu = u.embedding();
    const auto& fv = v.embedding();
    if (fu.size() != fv.size()) throw LengthError("edge endpoints have different embedding dimensions");
    double dist2 = 0.0;
    for (std::size_t k = 0; k < fu.size(); ++k) {
        const double d = fu[k] - fv[k];
        dist2 += d * d;
    }
    return {
        2.0 * (first.x - last.x) / height_sum,
        2.0 * (first.y - last.y) / height_sum,
        std::log(first.w / last.w),
        std::log(first.h / last.h),
        static_cast<double>(v.start_frame() - u.end_frame()),
        std::sqrt(dist2),
    };
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw LengthError("cosine of vectors with different lengths");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
    }
    if (na <= 0.0 || nb <= 0.0) throw ValidationError("zero-norm embedding");
    return dot / std::sqrt(na * nb);
}

}  // namespace conolink
