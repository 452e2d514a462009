#include "conolink/graph_builder.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <unordered_map>

#include "conolink/assignment.hpp"
#include "conolink/error.hpp"
#include "conolink/geometry.hpp"

namespace conolink {

void validate(const BuilderConfig& cfg) {
    if (cfg.top_k < 1) throw ValidationError("top_k must be at least 1");
    if (!(cfg.new_track_threshold > 0.0 && cfg.new_track_threshold < 1.0)) {
        throw ValidationError("new_track_threshold must lie in (0, 1)");
    }
    if (cfg.lookback < 1) throw ValidationError("lookback must be at least 1");
}

Association associate_frames(const DetectionSet& dets, const AffinityMatrix& affinity, const BuilderConfig& cfg) {
    validate(cfg);
    if (affinity.size() != dets.size()) throw LengthError("affinity matrix does not match detection set");
    const auto& all = dets.detections();
    std::vector<MemberList> tracks;
    std::set<DetLink> links;
    if (all.empty()) return {};

    const int first = all.front().frame;
    for (int frame = first; frame < dets.end_frame(); ++frame) {
        const auto [begin, end] = dets.frame_range(frame);
        if (begin == end) continue;
        if (frame == first) {
            for (std::size_t j = begin; j < end; ++j) tracks.push_back({j});
            continue;
        }
        const int lookback = std::min(frame - first, cfg.lookback);
        std::vector<std::size_t> active;
        for (std::size_t t = 0; t < tracks.size(); ++t) {
            if (all[tracks[t].back()].frame >= frame - lookback) active.push_back(t);
        }
        std::vector<MemberList> active_members;
        active_members.reserve(active.size());
        for (std::size_t t : active) active_members.push_back(tracks[t]);

        const StepCosts costs = step_cost_matrix(dets, active_members, begin, end, frame, lookback, affinity);
        const std::vector<int> assignment = solve_assignment(costs.cost);

        std::vector<char> taken(end - begin, 0);
        const auto cols = static_cast<std::size_t>(end - begin);
        for (std::size_t a = 0; a < active.size(); ++a) {
            const std::size_t last = active_members[a].back();
            const int col = assignment[a];
            if (col >= 0 && -costs.cost(static_cast<Eigen::Index>(a), col) >= cfg.new_track_threshold) {
                taken[static_cast<std::size_t>(col)] = 1;
                links.insert({last, begin + static_cast<std::size_t>(col)});
                tracks[active[a]].push_back(begin + static_cast<std::size_t>(col));
            }
            std::vector<std::size_t> order(cols);
            std::iota(order.begin(), order.end(), 0);
            const auto k = std::min<std::size_t>(static_cast<std::size_t>(cfg.top_k), cols);
            std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                              [&](std::size_t x, std::size_t y) {
                                  const double sx = costs.similarity(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(x));
                                  const double sy = costs.similarity(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(y));
                                  return sx != sy ? sx > sy : x < y;
                              });
            for (std::size_t r = 0; r < k; ++r) links.insert({last, begin + order[r]});
        }
        for (std::size_t c = 0; c < cols; ++c) {
            if (!taken[c]) tracks.push_back({begin + c});
        }
    }

    Association out;
    out.links.assign(links.begin(), links.end());
    out.tracklets.reserve(tracks.size());
    for (std::size_t t = 0; t < tracks.size(); ++t) {
        std::vector<Detection> members;
        members.reserve(tracks[t].size());
        for (std::size_t i : tracks[t]) members.push_back(all[i]);
        out.tracklets.emplace_back(static_cast<int>(t), std::move(members));
    }
    return out;
}

namespace {

EdgeKind kind_between(NodeKind a, NodeKind b) {
    if (a == NodeKind::Det && b == NodeKind::Det) return EdgeKind::DetDet;
    if (a == NodeKind::Traj && b == NodeKind::Traj) return EdgeKind::TrajTraj;
    return EdgeKind::DetTraj;
}

void link(TrackGraph& graph, std::size_t u, std::size_t v) {
    const auto& nodes = graph.nodes();
    Edge edge;
    edge.u = u;
    edge.v = v;
    edge.kind = kind_between(nodes[u].kind, nodes[v].kind);
    edge.init_features = init_edge_features(nodes[u], nodes[v]);
    graph.add_edge(std::move(edge));
}

// Local position of a detection inside `dets`, looked up by its source index.
std::unordered_map<std::int64_t, std::size_t> local_positions(const DetectionSet& dets) {
    std::unordered_map<std::int64_t, std::size_t> out;
    out.reserve(dets.size());
    for (std::size_t i = 0; i < dets.size(); ++i) out.emplace(dets.detections()[i].index, i);
    return out;
}

}  // namespace

TrackGraph build_part_graph(const Association& association, const DetectionSet& dets, int lookback) {
    TrackGraph graph;
    const auto& all = dets.detections();
    for (std::size_t i = 0; i < all.size(); ++i) graph.add_node(make_det_node(all[i], i));

    const auto position = local_positions(dets);
    std::vector<char> absorbed(all.size(), 0);
    std::vector<std::size_t> traj_nodes;
    for (const auto& track : association.tracklets) {
        if (track.size() < 2) continue;
        for (const auto& det : track.detections()) absorbed[position.at(det.index)] = 1;
        traj_nodes.push_back(graph.add_node(make_traj_node(track, 0)));
    }

    for (const auto& l : association.links) link(graph, l.from, l.to);

    const auto& nodes = graph.nodes();
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (absorbed[i]) continue;
        const int frame = all[i].frame;
        for (std::size_t t : traj_nodes) {
            const int start = nodes[t].start_frame();
            const int end = nodes[t].end_frame();
            if (end < frame && frame - end <= lookback) link(graph, t, i);
            else if (start > frame && start - frame <= lookback) link(graph, i, t);
        }
    }

    for (std::size_t a = 0; a < traj_nodes.size(); ++a) {
        for (std::size_t b = a + 1; b < traj_nodes.size(); ++b) {
            const auto& na = nodes[traj_nodes[a]];
            const auto& nb = nodes[traj_nodes[b]];
            if (temporal_iou(na.start_frame(), na.end_frame(), nb.start_frame(), nb.end_frame()) > 0.0) continue;
            if (na.end_frame() < nb.start_frame()) link(graph, traj_nodes[a], traj_nodes[b]);
            else link(graph, traj_nodes[b], traj_nodes[a]);
        }
    }
    return graph;
}

TrackGraph build_traj_graph(const std::vector<Tracklet>& tracklets) {
    TrackGraph graph;
    for (const auto& track : tracklets) {
        if (track.size() == 1) graph.add_node(make_det_node(track.front(), 0));
        else graph.add_node(make_traj_node(track, 0));
    }
    const auto& nodes = graph.nodes();
    for (std::size_t a = 0; a < nodes.size(); ++a) {
        for (std::size_t b = a + 1; b < nodes.size(); ++b) {
            if (nodes[a].end_frame() < nodes[b].start_frame()) link(graph, a, b);
            else if (nodes[b].end_frame() < nodes[a].start_frame()) link(graph, b, a);
        }
    }
    return graph;
}

TrackGraph build_fully_graph(const DetectionSet& dets) {
    TrackGraph graph;
    const auto& all = dets.detections();
    for (std::size_t i = 0; i < all.size(); ++i) graph.add_node(make_det_node(all[i], i));
    for (std::size_t i = 0; i < all.size(); ++i) {
        for (std::size_t j = dets.frame_range(all[i].frame).second; j < all.size(); ++j) link(graph, i, j);
    }
    return graph;
}

std::uint64_t fully_connected_edge_count(const DetectionSet& dets) {
    std::uint64_t total = 0;
    std::uint64_t seen = 0;
    for (int f = dets.first_frame(); f < dets.end_frame(); ++f) {
        const auto n = static_cast<std::uint64_t>(dets.frame(f).size());
        total += n * seen;
        seen += n;
    }
    return total;
}

double edge_coverage(const TrackGraph& graph, const DetectionSet& dets) {
    if (!dets.has_gt() && !dets.empty()) throw ValidationError("edge coverage requires ground-truth ids");
    // Nodes containing each source detection index.
    std::unordered_map<std::int64_t, std::vector<std::size_t>> owners;
    for (const auto& node : graph.nodes()) {
        for (std::int64_t idx : node.member_indices()) owners[idx].push_back(node.node_index);
    }
    std::set<std::pair<std::size_t, std::size_t>> edge_set;
    for (const auto& e : graph.edges()) edge_set.emplace(e.u, e.v);

    std::map<int, std::vector<const Detection*>> by_id;
    for (const auto& det : dets.detections()) by_id[*det.gt_id].push_back(&det);

    std::size_t pairs = 0;
    std::size_t covered = 0;
    for (const auto& [id, members] : by_id) {
        for (std::size_t k = 1; k < members.size(); ++k) {
            ++pairs;
            const auto a = owners.find(members[k - 1]->index);
            const auto b = owners.find(members[k]->index);
            if (a == owners.end() || b == owners.end()) continue;
            bool ok = false;
            for (std::size_t x : a->second) {
                for (std::size_t y : b->second) {
                    if (x == y || edge_set.contains({x, y})) {
                        ok = true;
                        break;
                    }
                }
                if (ok) break;
            }
            if (ok) ++covered;
        }
    }
    if (pairs == 0) return 1.0;
    return static_cast<double>(covered) / static_cast<double>(pairs);
}

void label_edges(TrackGraph& graph) {
    // Successor of each detection along its ground-truth identity, by source index.
    std::map<int, std::map<int, std::int64_t>> frames_by_id;
    for (const auto& node : graph.nodes()) {
        auto visit = [&](const Detection& det) {
            if (!det.gt_id) throw ValidationError("edge labels require ground-truth ids");
            frames_by_id[*det.gt_id][det.frame] = det.index;
        };
        if (const auto* det = std::get_if<Detection>(&node.payload)) visit(*det);
        else for (const auto& det : std::get<Tracklet>(node.payload).detections()) visit(det);
    }
    std::unordered_map<std::int64_t, std::int64_t> successor;
    for (const auto& [id, frames] : frames_by_id) {
        for (auto it = frames.begin(); std::next(it) != frames.end(); ++it) successor[it->second] = std::next(it)->second;
    }
    const auto& nodes = graph.nodes();
    for (auto& edge : graph.mutable_edges()) {
        const auto last_u = nodes[edge.u].member_indices().back();
        const auto first_v = nodes[edge.v].member_indices().front();
        const auto it = successor.find(last_u);
        edge.label = (it != successor.end() && it->second == first_v) ? 1 : 0;
    }
}

void write_graph_text(const TrackGraph& graph, std::ostream& out) {
    auto number = [](double value) {
        char buf[64];
        const auto res = std::to_chars(buf, buf + sizeof(buf), value);
        return std::string(buf, res.ptr);
    };
    out << "graph nodes " << graph.node_count() << " edges " << graph.edge_count() << '\n';
    for (const auto& node : graph.nodes()) {
        out << "node " << node.node_index << ' ' << to_string(node.kind) << ' ' << node.start_frame() + 1 << ' '
            << node.end_frame() + 1 << ' ' << node.member_count() << '\n';
    }
    for (const auto& edge : graph.edges()) {
        out << "edge " << edge.u << ' ' << edge.v << ' ' << to_string(edge.kind);
        for (double f : edge.init_features) out << ' ' << number(f);
        out << ' ' << (edge.score ? number(*edge.score) : std::string("-")) << '\n';
    }
}

}  // namespace conolink
