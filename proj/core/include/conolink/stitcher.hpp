#pragma once

#include <functional>
#include <span>
#include <vector>

#include "conolink/ingest.hpp"
#include "conolink/types.hpp"

namespace conolink {

struct ClipPlan {
    int clip_len = 512;
    int overlap = 256;
};

void validate(const ClipPlan& plan);

/// Clip start frames (relative to the first frame) covering `n_frames` frames,
/// spaced clip_len - overlap apart.
std::vector<int> clip_starts(int n_frames, const ClipPlan& plan);

/// #(A & B) / #(A | B) over the source detections both tracks own in frames
/// [begin, end). Interpolated detections do not count.
double track_iou(const Tracklet& a, const Tracklet& b, int begin, int end);

/// Merges the tracks of an earlier clip with those of a later clip that starts at
/// `overlap_begin`; the clips share frames [overlap_begin, overlap_end).
///
/// Pairs are matched by the Hungarian method on cost 1 - track_iou; pairs sharing no
/// detection can never match. A matched pair keeps the earlier id, with the later
/// clip owning the shared frames. Unmatched later tracks get fresh ids above every
/// earlier id; unmatched earlier tracks lose detections the later clip claims.
std::vector<Tracklet> stitch(std::span<const Tracklet> earlier, std::span<const Tracklet> later, int overlap_begin,
                             int overlap_end);

/// Inserts a linearly interpolated box at every missing frame between consecutive
/// members. Inserted detections take the lower endpoint confidence and the mean
/// endpoint embedding, and carry no source index.
Tracklet interpolate_gaps(const Tracklet& track);

using ClipTracker = std::function<std::vector<Tracklet>(const DetectionSet& clip)>;

/// Tracks each clip independently (up to `threads` at a time), stitches consecutive
/// clips left to right, renumbers ids from 1 by (start frame, first index), and
/// optionally fills gaps.
std::vector<Tracklet> run_clipped(const DetectionSet& dets, const ClipPlan& plan, const ClipTracker& tracker,
                                  bool interpolate = true, unsigned threads = 1);

/// Renumbers ids from 1 in order of (start frame, first detection index).
std::vector<Tracklet> renumber(std::vector<Tracklet> tracks);

}  // namespace conolink
