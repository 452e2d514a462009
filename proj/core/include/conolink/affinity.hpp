#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "conolink/ingest.hpp"
#include "conolink/types.hpp"

namespace conolink {

struct WindowPlan {
    int window = 32;
    int step = 16;
    int clip_len = 512;
};

void validate(const WindowPlan& plan);

/// Start offsets (relative to the first frame) of the sliding windows that cover
/// `span_frames` frames: 0, step, 2*step, ... until a window reaches the end.
std::vector<int> window_starts(int span_frames, const WindowPlan& plan);

/// Clip-level pairwise similarity accumulator.
///
/// Indices are local positions in the DetectionSet the matrix was built for. Only
/// pairs from different frames that share at least one window are stored; the stored
/// value is the arithmetic mean of all window contributions. Storage is banded: a
/// detection only keeps entries for later detections within `window - 1` frames.
class AffinityMatrix {
public:
    AffinityMatrix() = default;
    AffinityMatrix(const DetectionSet& dets, int window);

    std::size_t size() const noexcept { return row_begin_.size(); }

    /// Adds one window contribution for the unordered pair (i, j).
    void add(std::size_t i, std::size_t j, double similarity);

    bool contains(std::size_t i, std::size_t j) const;
    /// Mean similarity, or 0 when the pair was never co-windowed.
    double value(std::size_t i, std::size_t j) const;
    std::optional<double> get(std::size_t i, std::size_t j) const;
    double sum(std::size_t i, std::size_t j) const;
    unsigned count(std::size_t i, std::size_t j) const;
    /// Number of stored pairs.
    std::size_t entries() const noexcept;

private:
    struct Cell {
        double sum = 0.0;
        unsigned count = 0;
    };
    const Cell* cell(std::size_t i, std::size_t j) const;
    Cell* cell(std::size_t i, std::size_t j);

    // Row i covers local indices [row_begin_[i], row_begin_[i] + rows_[i].size()).
    std::vector<std::size_t> row_begin_;
    std::vector<std::vector<Cell>> rows_;
};

/// Scores the detections of one window. The returned matrix is n x n for n inputs;
/// only entries between different frames are read, and they must lie in [0, 1].
class AffinityScorer {
public:
    virtual ~AffinityScorer() = default;
    virtual Eigen::MatrixXd score(std::span<const Detection* const> window) const = 0;
};

/// (1 + cos(f_i, f_j)) / 2 on the stored embeddings.
class CosineScorer final : public AffinityScorer {
public:
    Eigen::MatrixXd score(std::span<const Detection* const> window) const override;
};

/// 1 for equal ground-truth ids, 0 otherwise. Requires gt ids.
class OracleScorer final : public AffinityScorer {
public:
    Eigen::MatrixXd score(std::span<const Detection* const> window) const override;
};

/// Slides `plan` over the frames of `dets`, scores each window, and averages
/// overlapping contributions. Windows are scored on up to `threads` workers and
/// merged in window order, so the result does not depend on the thread count.
AffinityMatrix accumulate_affinity(const DetectionSet& dets, const WindowPlan& plan, const AffinityScorer& scorer,
                                   unsigned threads = 1);

/// Per-step association costs between active tracks and the detections of one frame.
struct StepCosts {
    Eigen::MatrixXd similarity;  ///< M-bar: mean accumulated similarity per track member.
    Eigen::MatrixXd overlap;     ///< M-hat: IoU between each track's last box and the frame's boxes.
    Eigen::MatrixXd cost;        ///< -max(similarity, overlap), entries in [-1, 0].
};

/// A track as seen by the frame-by-frame associator: its members' local indices in
/// frame order.
using MemberList = std::vector<std::size_t>;

/// Builds costs for `tracks` against the detections at local positions
/// [frame_begin, frame_end), which all belong to `frame`. Only members inside the
/// lookback frames [frame - lookback, frame - 1] contribute to M-bar.
StepCosts step_cost_matrix(const DetectionSet& dets, std::span<const MemberList> tracks, std::size_t frame_begin,
                           std::size_t frame_end, int frame, int lookback, const AffinityMatrix& affinity);

}  // namespace conolink
