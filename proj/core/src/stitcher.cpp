#include "conolink/stitcher.hpp"

#include <algorithm>
#include <future>
#include <set>
#include <unordered_set>

#include <Eigen/Core>

#include "conolink/assignment.hpp"
#include "conolink/error.hpp"

namespace conolink {

void validate(const ClipPlan& plan) {
    if (!(plan.overlap > 0 && plan.overlap < plan.clip_len)) {
        throw ValidationError("clip plan requires 0 < overlap < clip_len");
    }
}

std::vector<int> clip_starts(int n_frames, const ClipPlan& plan) {
    validate(plan);
    std::vector<int> starts;
    if (n_frames <= 0) return starts;
    const int stride = plan.clip_len - plan.overlap;
    for (int start = 0;; start += stride) {
        starts.push_back(start);
        if (start + plan.clip_len >= n_frames) break;
    }
    return starts;
}

namespace {

std::set<std::int64_t> owned_in(const Tracklet& t, int begin, int end) {
    std::set<std::int64_t> out;
    for (const auto& det : t.detections()) {
        if (det.frame >= begin && det.frame < end && det.index != kNoIndex) out.insert(det.index);
    }
    return out;
}

}  // namespace

double track_iou(const Tracklet& a, const Tracklet& b, int begin, int end) {
    const auto sa = owned_in(a, begin, end);
    const auto sb = owned_in(b, begin, end);
    std::size_t inter = 0;
    for (auto idx : sa) inter += sb.contains(idx) ? 1 : 0;
    const std::size_t uni = sa.size() + sb.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<Tracklet> stitch(std::span<const Tracklet> earlier, std::span<const Tracklet> later, int overlap_begin,
                             int overlap_end) {
    std::vector<std::set<std::int64_t>> sa, sb;
    for (const auto& t : earlier) sa.push_back(owned_in(t, overlap_begin, overlap_end));
    for (const auto& t : later) sb.push_back(owned_in(t, overlap_begin, overlap_end));

    Eigen::MatrixXd cost(static_cast<Eigen::Index>(earlier.size()), static_cast<Eigen::Index>(later.size()));
    for (std::size_t i = 0; i < earlier.size(); ++i) {
        for (std::size_t j = 0; j < later.size(); ++j) {
            std::size_t inter = 0;
            for (auto idx : sa[i]) inter += sb[j].contains(idx) ? 1 : 0;
            const std::size_t uni = sa[i].size() + sb[j].size() - inter;
            cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                inter > 0 ? 1.0 - static_cast<double>(inter) / static_cast<double>(uni) : kForbidden;
        }
    }
    const std::vector<int> match = solve_assignment(cost);

    std::unordered_set<std::int64_t> claimed;
    for (const auto& t : later) {
        for (const auto& det : t.detections()) {
            if (det.index != kNoIndex) claimed.insert(det.index);
        }
    }

    int next_id = 0;
    for (const auto& t : earlier) next_id = std::max(next_id, t.id() + 1);
    std::vector<char> later_used(later.size(), 0);
    std::vector<Tracklet> out;
    for (std::size_t i = 0; i < earlier.size(); ++i) {
        const auto& a = earlier[i];
        std::vector<Detection> members;
        if (match[i] >= 0) {
            const auto& b = later[static_cast<std::size_t>(match[i])];
            later_used[static_cast<std::size_t>(match[i])] = 1;
            // Overlap detections nobody in the later clip claimed stay with the earlier
            // track as long as they precede the later track.
            for (const auto& det : a.detections()) {
                if (det.frame < overlap_begin || (det.frame < b.start_frame() && !claimed.contains(det.index))) {
                    members.push_back(det);
                }
            }
            members.insert(members.end(), b.detections().begin(), b.detections().end());
        } else {
            for (const auto& det : a.detections()) {
                if (det.frame < overlap_begin || !claimed.contains(det.index)) members.push_back(det);
            }
        }
        if (!members.empty()) out.emplace_back(a.id(), std::move(members));
    }
    for (std::size_t j = 0; j < later.size(); ++j) {
        if (!later_used[j]) out.emplace_back(next_id++, later[j].detections());
    }
    std::sort(out.begin(), out.end(), [](const Tracklet& x, const Tracklet& y) { return x.id() < y.id(); });
    return out;
}

Tracklet interpolate_gaps(const Tracklet& track) {
    if (track.size() < 2) return track;
    std::vector<Detection> out;
    const auto& dets = track.detections();
    for (std::size_t k = 0; k + 1 < dets.size(); ++k) {
        const Detection& a = dets[k];
        const Detection& b = dets[k + 1];
        out.push_back(a);
        const int gap = b.frame - a.frame;
        for (int step = 1; step < gap; ++step) {
            const double t = static_cast<double>(step) / static_cast<double>(gap);
            Detection fill;
            fill.frame = a.frame + step;
            fill.box = {a.box.x + t * (b.box.x - a.box.x), a.box.y + t * (b.box.y - a.box.y),
                        a.box.w + t * (b.box.w - a.box.w), a.box.h + t * (b.box.h - a.box.h)};
            fill.confidence = std::min(a.confidence, b.confidence);
            fill.embedding.resize(a.embedding.size());
            for (std::size_t i = 0; i < fill.embedding.size(); ++i) {
                fill.embedding[i] = 0.5 * (a.embedding[i] + b.embedding[i]);
            }
            fill.index = kNoIndex;
            out.push_back(std::move(fill));
        }
    }
    out.push_back(dets.back());
    return Tracklet(track.id(), std::move(out));
}

std::vector<Tracklet> renumber(std::vector<Tracklet> tracks) {
    std::sort(tracks.begin(), tracks.end(), [](const Tracklet& a, const Tracklet& b) {
        if (a.start_frame() != b.start_frame()) return a.start_frame() < b.start_frame();
        return a.front().index < b.front().index;
    });
    for (std::size_t i = 0; i < tracks.size(); ++i) tracks[i].set_id(static_cast<int>(i) + 1);
    return tracks;
}

std::vector<Tracklet> run_clipped(const DetectionSet& dets, const ClipPlan& plan, const ClipTracker& tracker,
                                  bool interpolate, unsigned threads) {
    validate(plan);
    const std::vector<int> starts = clip_starts(dets.n_frames(), plan);
    std::vector<std::vector<Tracklet>> per_clip(starts.size());
    auto run_one = [&](std::size_t c) {
        const int first = dets.first_frame() + starts[c];
        return tracker(dets.slice(first, first + plan.clip_len));
    };
    const unsigned workers = std::max(1u, threads);
    for (std::size_t batch = 0; batch < starts.size(); batch += workers) {
        if (workers == 1) {
            per_clip[batch] = run_one(batch);
            continue;
        }
        std::vector<std::future<std::vector<Tracklet>>> pending;
        for (std::size_t c = batch; c < std::min(starts.size(), batch + workers); ++c) {
            pending.push_back(std::async(std::launch::async, run_one, c));
        }
        for (std::size_t k = 0; k < pending.size(); ++k) per_clip[batch + k] = pending[k].get();
    }

    std::vector<Tracklet> merged;
    for (std::size_t c = 0; c < per_clip.size(); ++c) {
        if (c == 0) {
            merged = std::move(per_clip[0]);
            continue;
        }
        const int begin = dets.first_frame() + starts[c];
        const int end = dets.first_frame() + starts[c - 1] + plan.clip_len;
        merged = stitch(merged, per_clip[c], begin, end);
    }
    if (interpolate) {
        for (auto& t : merged) t = interpolate_gaps(t);
    }
    return renumber(std::move(merged));
}

}  // namespace conolink
