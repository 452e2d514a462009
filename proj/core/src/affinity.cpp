#include "conolink/affinity.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <string>

#include "conolink/error.hpp"
#include "conolink/geometry.hpp"

namespace conolink {

void validate(const WindowPlan& plan) {
    if (!(plan.step > 0 && plan.step <= plan.window && plan.window <= plan.clip_len)) {
        throw ValidationError("window plan requires 0 < step <= window <= clip_len");
    }
}

std::vector<int> window_starts(int span_frames, const WindowPlan& plan) {
    validate(plan);
    std::vector<int> starts;
    if (span_frames <= 0) return starts;
    for (int start = 0;; start += plan.step) {
        starts.push_back(start);
        if (start + plan.window >= span_frames) break;
    }
    return starts;
}

// ---------------------------------------------------------------------------

AffinityMatrix::AffinityMatrix(const DetectionSet& dets, int window) {
    const auto& all = dets.detections();
    row_begin_.resize(all.size());
    rows_.resize(all.size());
    std::size_t hi = 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
        const int frame = all[i].frame;
        const std::size_t lo = dets.frame_range(frame).second;
        hi = std::max(hi, lo);
        while (hi < all.size() && all[hi].frame < frame + window) ++hi;
        row_begin_[i] = lo;
        rows_[i].resize(hi - lo);
    }
}

const AffinityMatrix::Cell* AffinityMatrix::cell(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    if (j >= row_begin_.size() || j < row_begin_[i]) return nullptr;
    const std::size_t offset = j - row_begin_[i];
    if (offset >= rows_[i].size()) return nullptr;
    return &rows_[i][offset];
}

AffinityMatrix::Cell* AffinityMatrix::cell(std::size_t i, std::size_t j) {
    return const_cast<Cell*>(static_cast<const AffinityMatrix*>(this)->cell(i, j));
}

void AffinityMatrix::add(std::size_t i, std::size_t j, double similarity) {
    Cell* c = cell(i, j);
    if (c == nullptr) throw ValidationError("affinity pair outside the window band");
    c->sum += similarity;
    ++c->count;
}

bool AffinityMatrix::contains(std::size_t i, std::size_t j) const {
    const Cell* c = cell(i, j);
    return c != nullptr && c->count > 0;
}

std::optional<double> AffinityMatrix::get(std::size_t i, std::size_t j) const {
    const Cell* c = cell(i, j);
    if (c == nullptr || c->count == 0) return std::nullopt;
    return c->sum / c->count;
}

double AffinityMatrix::value(std::size_t i, std::size_t j) const { return get(i, j).value_or(0.0); }

double AffinityMatrix::sum(std::size_t i, std::size_t j) const {
    const Cell* c = cell(i, j);
    return c ? c->sum : 0.0;
}

unsigned AffinityMatrix::count(std::size_t i, std::size_t j) const {
    const Cell* c = cell(i, j);
    return c ? c->count : 0;
}

std::size_t AffinityMatrix::entries() const noexcept {
    std::size_t n = 0;
    for (const auto& row : rows_) {
        n += static_cast<std::size_t>(std::count_if(row.begin(), row.end(), [](const Cell& c) { return c.count > 0; }));
    }
    return n;
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd CosineScorer::score(std::span<const Detection* const> window) const {
    const auto n = static_cast<Eigen::Index>(window.size());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    std::vector<double> norms(window.size());
    for (std::size_t i = 0; i < window.size(); ++i) {
        double sq = 0.0;
        for (double value : window[i]->embedding) sq += value * value;
        if (!(sq > 0.0)) throw ValidationError("zero-norm embedding in cosine scorer");
        norms[i] = std::sqrt(sq);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& fi = window[static_cast<std::size_t>(i)]->embedding;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const auto& fj = window[static_cast<std::size_t>(j)]->embedding;
            if (window[static_cast<std::size_t>(i)]->frame == window[static_cast<std::size_t>(j)]->frame) continue;
            if (fi.size() != fj.size()) throw LengthError("embedding dimensions differ");
            double dot = 0.0;
            for (std::size_t k = 0; k < fi.size(); ++k) dot += fi[k] * fj[k];
            const double cosine = dot / (norms[static_cast<std::size_t>(i)] * norms[static_cast<std::size_t>(j)]);
            const double sim = std::clamp((1.0 + cosine) / 2.0, 0.0, 1.0);
            out(i, j) = sim;
            out(j, i) = sim;
        }
    }
    return out;
}

Eigen::MatrixXd OracleScorer::score(std::span<const Detection* const> window) const {
    const auto n = static_cast<Eigen::Index>(window.size());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    for (const auto* det : window) {
        if (!det->gt_id) throw ValidationError("oracle scorer requires ground-truth ids");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            out(i, j) = *window[static_cast<std::size_t>(i)]->gt_id == *window[static_cast<std::size_t>(j)]->gt_id
                            ? 1.0
                            : 0.0;
        }
    }
    return out;
}

AffinityMatrix accumulate_affinity(const DetectionSet& dets, const WindowPlan& plan, const AffinityScorer& scorer,
                                   unsigned threads) {
    validate(plan);
    AffinityMatrix matrix(dets, plan.window);
    if (dets.empty()) return matrix;
    const int first = dets.detections().front().frame;
    const int last = dets.detections().back().frame;
    const int span = last - first + 1;
    if (span > plan.clip_len) {
        throw ValidationError("detections span " + std::to_string(span) + " frames, more than clip_len " +
                              std::to_string(plan.clip_len));
    }
    const std::vector<int> starts = window_starts(span, plan);

    struct Block {
        std::size_t begin = 0;
        Eigen::MatrixXd scores;
    };
    auto score_window = [&](int start) {
        const int lo_frame = first + start;
        const int hi_frame = lo_frame + plan.window;  // exclusive
        const std::size_t begin = dets.frame_range(lo_frame).first;
        std::size_t end = begin;
        const auto& all = dets.detections();
        while (end < all.size() && all[end].frame < hi_frame) ++end;
        std::vector<const Detection*> window;
        window.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) window.push_back(&all[i]);
        Block block{begin, scorer.score(window)};
        if (block.scores.rows() != static_cast<Eigen::Index>(window.size()) || block.scores.cols() != block.scores.rows()) {
            throw LengthError("scorer returned a block of the wrong shape");
        }
        return block;
    };
    auto merge = [&](const Block& block) {
        const auto& all = dets.detections();
        const auto n = block.scores.rows();
        for (Eigen::Index i = 0; i < n; ++i) {
            const std::size_t gi = block.begin + static_cast<std::size_t>(i);
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const std::size_t gj = block.begin + static_cast<std::size_t>(j);
                if (all[gi].frame == all[gj].frame) continue;
                const double s = block.scores(i, j);
                if (!(s >= 0.0 && s <= 1.0)) throw NumericError("scorer similarity outside [0, 1]");
                matrix.add(gi, gj, s);
            }
        }
    };

    const unsigned workers = std::max(1u, threads);
    if (workers == 1) {
        for (int start : starts) merge(score_window(start));
        return matrix;
    }
    for (std::size_t batch = 0; batch < starts.size(); batch += workers) {
        std::vector<std::future<Block>> pending;
        for (std::size_t k = batch; k < std::min(starts.size(), batch + workers); ++k) {
            pending.push_back(std::async(std::launch::async, score_window, starts[k]));
        }
        for (auto& f : pending) merge(f.get());
    }
    return matrix;
}

// ---------------------------------------------------------------------------

StepCosts step_cost_matrix(const DetectionSet& dets, std::span<const MemberList> tracks, std::size_t frame_begin,
                           std::size_t frame_end, int frame, int lookback, const AffinityMatrix& affinity) {
    const auto& all = dets.detections();
    const auto rows = static_cast<Eigen::Index>(tracks.size());
    const auto cols = static_cast<Eigen::Index>(frame_end - frame_begin);
    StepCosts out{Eigen::MatrixXd::Zero(rows, cols), Eigen::MatrixXd::Zero(rows, cols), Eigen::MatrixXd::Zero(rows, cols)};
    const int oldest = frame - lookback;
    for (Eigen::Index r = 0; r < rows; ++r) {
        const MemberList& members = tracks[static_cast<std::size_t>(r)];
        if (members.empty()) continue;
        std::vector<std::size_t> recent;
        for (auto it = members.rbegin(); it != members.rend(); ++it) {
            const int f = all[*it].frame;
            if (f >= frame) continue;
            if (f < oldest) break;
            recent.push_back(*it);
        }
        const BoundingBox& last_box = all[members.back()].box;
        for (Eigen::Index c = 0; c < cols; ++c) {
            const std::size_t j = frame_begin + static_cast<std::size_t>(c);
            double total = 0.0;
            for (std::size_t m : recent) total += affinity.value(m, j);
            const double sim = recent.empty() ? 0.0 : total / static_cast<double>(recent.size());
            const double ov = iou(last_box, all[j].box);
            out.similarity(r, c) = sim;
            out.overlap(r, c) = ov;
            out.cost(r, c) = -std::max(sim, ov);
        }
    }
    return out;
}

}  // namespace conolink
