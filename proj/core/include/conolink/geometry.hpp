#pragma once

#include "conolink/types.hpp"

namespace conolink {

/// Intersection over union of two boxes, in [0, 1].
double iou(const BoundingBox& a, const BoundingBox& b) noexcept;

/// Frame-count IoU of the inclusive spans [start, end].
double temporal_iou(int a_start, int a_end, int b_start, int b_end) noexcept;
double temporal_iou(const Tracklet& a, const Tracklet& b) noexcept;

inline bool spans_overlap(int a_start, int a_end, int b_start, int b_end) noexcept {
    return a_start <= b_end && b_start <= a_end;
}

/// Six-component edge descriptor between an earlier node `u` and a later node `v`:
/// relative position and size of u's last box against v's first box, the frame gap,
/// and the Euclidean distance between mean embeddings.
std::vector<double> init_edge_features(const CompositeNode& u, const CompositeNode& v);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace conolink
