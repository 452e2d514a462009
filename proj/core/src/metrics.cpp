#include "conolink/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>

#include <Eigen/Core>

#include "conolink/assignment.hpp"
#include "conolink/geometry.hpp"

namespace conolink {

namespace {

struct Box {
    int id = 0;
    BoundingBox box;
};

using FrameBoxes = std::map<int, std::vector<Box>>;

FrameBoxes by_frame(std::span<const Tracklet> tracks) {
    FrameBoxes out;
    for (const auto& t : tracks) {
        for (const auto& det : t.detections()) out[det.frame].push_back({t.id(), det.box});
    }
    return out;
}

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

Correspondence match_frames(std::span<const Tracklet> pred, std::span<const Tracklet> gt, double iou_gate) {
    const FrameBoxes pf = by_frame(pred);
    const FrameBoxes gf = by_frame(gt);
    std::vector<int> frames;
    for (const auto& [f, _] : pf) frames.push_back(f);
    for (const auto& [f, _] : gf) frames.push_back(f);
    std::sort(frames.begin(), frames.end());
    frames.erase(std::unique(frames.begin(), frames.end()), frames.end());

    static const std::vector<Box> kNone;
    std::map<int, int> previous;  // gt id -> pred id at its last match
    Correspondence corr;
    for (int frame : frames) {
        const auto pit = pf.find(frame);
        const auto git = gf.find(frame);
        const auto& ps = pit == pf.end() ? kNone : pit->second;
        const auto& gs = git == gf.end() ? kNone : git->second;

        Eigen::MatrixXd overlap(static_cast<Eigen::Index>(gs.size()), static_cast<Eigen::Index>(ps.size()));
        for (std::size_t g = 0; g < gs.size(); ++g) {
            for (std::size_t p = 0; p < ps.size(); ++p) {
                overlap(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(p)) = iou(gs[g].box, ps[p].box);
            }
        }

        std::vector<int> g_to_p(gs.size(), -1);
        std::vector<char> p_taken(ps.size(), 0);
        for (std::size_t g = 0; g < gs.size(); ++g) {
            const auto prev = previous.find(gs[g].id);
            if (prev == previous.end()) continue;
            for (std::size_t p = 0; p < ps.size(); ++p) {
                if (!p_taken[p] && ps[p].id == prev->second &&
                    overlap(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(p)) >= iou_gate) {
                    g_to_p[g] = static_cast<int>(p);
                    p_taken[p] = 1;
                    break;
                }
            }
        }

        std::vector<std::size_t> free_g, free_p;
        for (std::size_t g = 0; g < gs.size(); ++g) {
            if (g_to_p[g] < 0) free_g.push_back(g);
        }
        for (std::size_t p = 0; p < ps.size(); ++p) {
            if (!p_taken[p]) free_p.push_back(p);
        }
        if (!free_g.empty() && !free_p.empty()) {
            Eigen::MatrixXd cost(static_cast<Eigen::Index>(free_g.size()), static_cast<Eigen::Index>(free_p.size()));
            for (std::size_t a = 0; a < free_g.size(); ++a) {
                for (std::size_t b = 0; b < free_p.size(); ++b) {
                    const double v =
                        overlap(static_cast<Eigen::Index>(free_g[a]), static_cast<Eigen::Index>(free_p[b]));
                    cost(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                        v >= iou_gate ? 1.0 - v : kForbidden;
                }
            }
            const auto assigned = solve_assignment(cost);
            for (std::size_t a = 0; a < free_g.size(); ++a) {
                if (assigned[a] >= 0) g_to_p[free_g[a]] = static_cast<int>(free_p[static_cast<std::size_t>(assigned[a])]);
            }
        }

        FrameMatch fm;
        fm.frame = frame;
        for (std::size_t g = 0; g < gs.size(); ++g) {
            if (g_to_p[g] < 0) {
                ++fm.fn;
                continue;
            }
            const auto& p = ps[static_cast<std::size_t>(g_to_p[g])];
            const auto prev = previous.find(gs[g].id);
            if (prev != previous.end() && prev->second != p.id) ++fm.ids;
            previous[gs[g].id] = p.id;
            fm.pairs.push_back(
                {gs[g].id, p.id, overlap(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(g_to_p[g]))});
        }
        fm.fp = ps.size() - fm.pairs.size();
        corr.tp += fm.pairs.size();
        corr.fp += fm.fp;
        corr.fn += fm.fn;
        corr.ids += fm.ids;
        corr.gt_count += gs.size();
        corr.frames.push_back(std::move(fm));
    }
    return corr;
}

std::optional<double> mota(const Correspondence& corr) {
    if (corr.gt_count == 0) return std::nullopt;
    return 1.0 - static_cast<double>(corr.fn + corr.fp + corr.ids) / static_cast<double>(corr.gt_count);
}

IdentityCounts identity_counts(std::span<const Tracklet> pred, std::span<const Tracklet> gt, double iou_gate) {
    std::size_t pred_boxes = 0, gt_boxes = 0;
    for (const auto& t : pred) pred_boxes += t.size();
    for (const auto& t : gt) gt_boxes += t.size();

    // Overlap counts between every gt and pred identity.
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(gt.size()),
                                                   static_cast<Eigen::Index>(pred.size()));
    std::map<int, std::vector<std::pair<std::size_t, BoundingBox>>> pred_frames;
    for (std::size_t p = 0; p < pred.size(); ++p) {
        for (const auto& det : pred[p].detections()) pred_frames[det.frame].emplace_back(p, det.box);
    }
    for (std::size_t g = 0; g < gt.size(); ++g) {
        for (const auto& det : gt[g].detections()) {
            const auto it = pred_frames.find(det.frame);
            if (it == pred_frames.end()) continue;
            for (const auto& [p, box] : it->second) {
                if (iou(det.box, box) >= iou_gate) {
                    counts(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(p)) += 1.0;
                }
            }
        }
    }

    IdentityCounts out;
    if (!gt.empty() && !pred.empty()) {
        const double top = counts.maxCoeff();
        const Eigen::MatrixXd cost = (top - counts.array()).matrix();
        const auto assigned = solve_assignment(cost);
        for (std::size_t g = 0; g < gt.size(); ++g) {
            if (assigned[g] >= 0) {
                out.idtp += static_cast<std::size_t>(counts(static_cast<Eigen::Index>(g), assigned[g]));
            }
        }
    }
    out.idfp = pred_boxes - out.idtp;
    out.idfn = gt_boxes - out.idtp;
    return out;
}

double idf1(std::span<const Tracklet> pred, std::span<const Tracklet> gt, double iou_gate) {
    const IdentityCounts c = identity_counts(pred, gt, iou_gate);
    const std::size_t denom = 2 * c.idtp + c.idfp + c.idfn;
    if (denom == 0) return 1.0;
    return 2.0 * static_cast<double>(c.idtp) / static_cast<double>(denom);
}

GraphStats& GraphStats::operator+=(const GraphStats& other) {
    node_count += other.node_count;
    det_nodes += other.det_nodes;
    traj_nodes += other.traj_nodes;
    edge_count += other.edge_count;
    det_det += other.det_det;
    det_traj += other.det_traj;
    traj_traj += other.traj_traj;
    return *this;
}

GraphStats graph_stats(const TrackGraph& graph) {
    GraphStats s;
    s.node_count = graph.node_count();
    for (const auto& node : graph.nodes()) {
        (node.kind == NodeKind::Det ? s.det_nodes : s.traj_nodes) += 1;
    }
    s.edge_count = graph.edge_count();
    for (const auto& e : graph.edges()) {
        switch (e.kind) {
            case EdgeKind::DetDet: ++s.det_det; break;
            case EdgeKind::DetTraj: ++s.det_traj; break;
            case EdgeKind::TrajTraj: ++s.traj_traj; break;
        }
    }
    return s;
}

EvalReport evaluate(std::span<const Tracklet> pred, std::span<const Tracklet> gt, double iou_gate) {
    const Correspondence corr = match_frames(pred, gt, iou_gate);
    EvalReport r;
    r.mota = mota(corr);
    r.idf1 = idf1(pred, gt, iou_gate);
    r.ids = corr.ids;
    r.fp = corr.fp;
    r.fn = corr.fn;
    r.gt_count = corr.gt_count;
    if (!gt.empty() && !pred.empty()) {
        int gmin = gt.front().start_frame(), gmax = gt.front().end_frame();
        for (const auto& t : gt) {
            gmin = std::min(gmin, t.start_frame());
            gmax = std::max(gmax, t.end_frame());
        }
        for (const auto& t : pred) {
            if (t.start_frame() < gmin || t.end_frame() > gmax) r.frame_range_mismatch = true;
        }
    }
    return r;
}

void write_report_table(const EvalReport& r, std::ostream& out) {
    auto row = [&out](const char* key, const std::string& value) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%-10s %12s\n", key, value.c_str());
        out << buf;
    };
    row("MOTA", r.mota ? format_number(*r.mota) : "undefined");
    row("IDF1", format_number(r.idf1));
    row("IDS", std::to_string(r.ids));
    row("FP", std::to_string(r.fp));
    row("FN", std::to_string(r.fn));
    row("GT", std::to_string(r.gt_count));
    if (r.node_count > 0 || r.edge_count > 0) {
        row("nodes", std::to_string(r.node_count));
        row("edges", std::to_string(r.edge_count));
    }
    if (r.coverage) row("coverage", format_number(*r.coverage));
}

void write_report_kv(const EvalReport& r, std::ostream& out) {
    out << "mota=" << (r.mota ? format_number(*r.mota) : "undefined") << '\n';
    out << "idf1=" << format_number(r.idf1) << '\n';
    out << "ids=" << r.ids << '\n';
    out << "fp=" << r.fp << '\n';
    out << "fn=" << r.fn << '\n';
    out << "gt_count=" << r.gt_count << '\n';
    out << "node_count=" << r.node_count << '\n';
    out << "edge_count=" << r.edge_count << '\n';
    out << "coverage=" << (r.coverage ? format_number(*r.coverage) : "undefined") << '\n';
    out << "frame_range_mismatch=" << (r.frame_range_mismatch ? 1 : 0) << '\n';
}

}  // namespace conolink
