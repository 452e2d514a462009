#include "conolink/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>

#include "conolink/error.hpp"
#include "conolink/geometry.hpp"
#include "conolink/graph_builder.hpp"

namespace conolink {

void validate(const RoundingProblem& problem) {
    for (const auto& e : problem.edges) {
        if (e.u >= problem.node_count || e.v >= problem.node_count) throw ValidationError("edge endpoint out of range");
        if (e.u == e.v) throw ValidationError("self loop in rounding problem");
        if (!(e.score >= 0.0 && e.score <= 1.0)) throw ValidationError("edge score outside [0, 1]");
    }
}

double rounding_objective(const RoundingProblem& problem, const Labeling& labels) {
    if (labels.size() != problem.edges.size()) throw LengthError("labeling size mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double d = static_cast<double>(labels[i]) - problem.edges[i].score;
        total += d * d;
    }
    return total;
}

bool is_flow_feasible(const RoundingProblem& problem, const Labeling& labels) {
    if (labels.size() != problem.edges.size()) return false;
    std::vector<int> out_degree(problem.node_count, 0), in_degree(problem.node_count, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!labels[i]) continue;
        if (++out_degree[problem.edges[i].u] > 1) return false;
        if (++in_degree[problem.edges[i].v] > 1) return false;
    }
    return true;
}

namespace {

std::vector<std::size_t> score_order(std::span<const ScoredEdge> edges) {
    std::vector<std::size_t> order(edges.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ea = edges[a];
        const auto& eb = edges[b];
        if (ea.score != eb.score) return ea.score > eb.score;
        if (ea.u != eb.u) return ea.u < eb.u;
        return ea.v < eb.v;
    });
    return order;
}

}  // namespace

Labeling greedy_round(const RoundingProblem& problem, double epsilon) {
    validate(problem);
    Labeling labels(problem.edges.size(), 0);
    std::vector<char> out_used(problem.node_count, 0), in_used(problem.node_count, 0);
    for (std::size_t i : score_order(problem.edges)) {
        const auto& e = problem.edges[i];
        if (!(e.score > epsilon) || out_used[e.u] || in_used[e.v]) continue;
        labels[i] = 1;
        out_used[e.u] = 1;
        in_used[e.v] = 1;
    }
    return labels;
}

Labeling exact_round(const RoundingProblem& problem, double epsilon) {
    validate(problem);
    const std::size_t m = problem.edges.size();
    if (m > kExactRoundMaxEdges) {
        throw ValidationError("exact rounding supports at most " + std::to_string(kExactRoundMaxEdges) + " edges");
    }
    // Minimizing sum(label * (1 - 2 score)) is equivalent to minimizing the distance.
    std::vector<double> cost(m);
    for (std::size_t i = 0; i < m; ++i) cost[i] = 1.0 - 2.0 * problem.edges[i].score;

    Labeling current(m, 0), best(m, 0);
    double best_value = std::numeric_limits<double>::infinity();
    std::vector<char> out_used(problem.node_count, 0), in_used(problem.node_count, 0);
    constexpr double tie = 1e-12;

    // Depth-first, trying 1 before 0: the first optimum reached is the
    // lexicographically largest, and later leaves replace it only when strictly better.
    auto search = [&](auto&& self, std::size_t i, double value) -> void {
        if (i == m) {
            if (value < best_value - tie) {
                best_value = value;
                best = current;
            }
            return;
        }
        const auto& e = problem.edges[i];
        if (e.score > epsilon && !out_used[e.u] && !in_used[e.v]) {
            current[i] = 1;
            out_used[e.u] = in_used[e.v] = 1;
            self(self, i + 1, value + cost[i]);
            out_used[e.u] = in_used[e.v] = 0;
            current[i] = 0;
        }
        self(self, i + 1, value);
    };
    search(search, 0, 0.0);
    return best;
}

std::vector<int> connected_components_ids(std::span<const FrameSpan> nodes, std::span<const ScoredEdge> positive) {
    const std::size_t n = nodes.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::vector<std::vector<FrameSpan>> spans(n);
    for (std::size_t i = 0; i < n; ++i) spans[i] = {nodes[i]};

    auto find = [&](std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    auto overlapping = [](const std::vector<FrameSpan>& a, const std::vector<FrameSpan>& b) {
        for (const auto& x : a) {
            for (const auto& y : b) {
                if (spans_overlap(x.start, x.end, y.start, y.end)) return true;
            }
        }
        return false;
    };

    for (std::size_t i : score_order(positive)) {
        const auto& e = positive[i];
        if (e.u >= n || e.v >= n) throw ValidationError("edge endpoint out of range");
        std::size_t a = find(e.u);
        std::size_t b = find(e.v);
        if (a == b || overlapping(spans[a], spans[b])) continue;
        if (b < a) std::swap(a, b);
        parent[b] = a;
        spans[a].insert(spans[a].end(), spans[b].begin(), spans[b].end());
        spans[b].clear();
    }

    std::vector<int> ids(n, -1);
    std::unordered_map<std::size_t, int> root_id;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = find(i);
        auto [it, inserted] = root_id.emplace(r, static_cast<int>(root_id.size()));
        ids[i] = it->second;
    }
    return ids;
}

// ---------------------------------------------------------------------------

std::vector<double> MpnEdgeScorer::score(const TrackGraph& graph) const { return score_edges(graph, params_); }

std::vector<double> OracleEdgeScorer::score(const TrackGraph& graph) const {
    TrackGraph labeled = graph;
    label_edges(labeled);
    std::vector<double> out;
    out.reserve(labeled.edge_count());
    for (const auto& e : labeled.edges()) out.push_back(static_cast<double>(*e.label));
    return out;
}

std::vector<double> HandcraftedEdgeScorer::score(const TrackGraph& graph) const {
    std::vector<double> out;
    out.reserve(graph.edge_count());
    for (const auto& e : graph.edges()) {
        const auto& f = e.init_features;
        const double z = 4.0 - 6.0 * f[5] - 2.0 * (std::abs(f[0]) + std::abs(f[1])) -
                         2.0 * (std::abs(f[2]) + std::abs(f[3])) - 0.05 * (f[4] - 1.0);
        out.push_back(1.0 / (1.0 + std::exp(-z)));
    }
    return out;
}

void score_graph(TrackGraph& graph, const EdgeScorer& scorer) {
    const auto scores = scorer.score(graph);
    if (scores.size() != graph.edge_count()) throw LengthError("scorer returned the wrong number of scores");
    auto& edges = graph.mutable_edges();
    for (std::size_t i = 0; i < edges.size(); ++i) edges[i].score = std::clamp(scores[i], 0.0, 1.0);
}

void validate(const AggregateConfig& cfg) {
    if (!(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0)) throw ValidationError("epsilon must lie in (0, 1]");
    if (cfg.traj_passes < 0) throw ValidationError("traj_passes must be non-negative");
}

namespace {

// Groups `members` (detections) by `ids` into tracks ordered by (start, first index),
// numbered from 1.
std::vector<Tracklet> make_tracks(std::vector<std::vector<Detection>> groups) {
    for (auto& g : groups) {
        std::sort(g.begin(), g.end(), [](const Detection& a, const Detection& b) { return a.frame < b.frame; });
    }
    std::erase_if(groups, [](const auto& g) { return g.empty(); });
    std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) {
        if (a.front().frame != b.front().frame) return a.front().frame < b.front().frame;
        return a.front().index < b.front().index;
    });
    std::vector<Tracklet> tracks;
    tracks.reserve(groups.size());
    for (std::size_t i = 0; i < groups.size(); ++i) tracks.emplace_back(static_cast<int>(i) + 1, std::move(groups[i]));
    return tracks;
}

std::vector<double> checked_scores(const TrackGraph& graph, const EdgeScorer& scorer) {
    auto scores = scorer.score(graph);
    if (scores.size() != graph.edge_count()) throw LengthError("scorer returned the wrong number of scores");
    for (auto& s : scores) {
        if (!std::isfinite(s)) throw NumericError("edge scorer produced a non-finite score");
        s = std::clamp(s, 0.0, 1.0);
    }
    return scores;
}

}  // namespace

AggregateResult aggregate(const TrackGraph& graph, const EdgeScorer& scorer, const AggregateConfig& cfg) {
    validate(cfg);
    const auto& nodes = graph.nodes();
    AggregateResult result;

    std::vector<std::vector<Detection>> groups;
    if (cfg.first_pass == FirstPassMode::Tracker) {
        std::unordered_map<std::int64_t, char> in_traj;
        for (const auto& node : nodes) {
            if (node.kind != NodeKind::Traj) continue;
            const auto& track = std::get<Tracklet>(node.payload);
            groups.push_back(track.detections());
            for (const auto& det : track.detections()) in_traj[det.index] = 1;
        }
        for (const auto& node : nodes) {
            if (node.kind != NodeKind::Det) continue;
            const auto& det = std::get<Detection>(node.payload);
            if (!in_traj.contains(det.index)) groups.push_back({det});
        }
    } else {
        const std::vector<double> scores = graph.edge_count() ? checked_scores(graph, scorer) : std::vector<double>{};
        RoundingProblem problem{nodes.size(), {}};
        for (std::size_t i = 0; i < graph.edges().size(); ++i) {
            const auto& e = graph.edges()[i];
            if (e.kind == EdgeKind::DetDet) problem.edges.push_back({e.u, e.v, scores[i]});
        }
        const Labeling labels = greedy_round(problem, cfg.epsilon);
        std::vector<ScoredEdge> positive;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i]) positive.push_back(problem.edges[i]);
        }
        std::vector<FrameSpan> spans;
        for (const auto& node : nodes) spans.push_back({node.start_frame(), node.end_frame()});
        const std::vector<int> ids = connected_components_ids(spans, positive);
        std::unordered_map<int, std::size_t> slot;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (nodes[i].kind != NodeKind::Det) continue;
            auto [it, inserted] = slot.emplace(ids[i], groups.size());
            if (inserted) groups.emplace_back();
            groups[it->second].push_back(std::get<Detection>(nodes[i].payload));
        }
    }
    std::vector<Tracklet> tracks = make_tracks(std::move(groups));
    result.first_pass_tracks = tracks;

    for (int pass = 0; pass < cfg.traj_passes && tracks.size() > 1; ++pass) {
        const TrackGraph traj_graph = build_traj_graph(tracks);
        if (traj_graph.edge_count() == 0) break;
        const std::vector<double> scores = checked_scores(traj_graph, scorer);
        std::vector<ScoredEdge> positive;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] > cfg.epsilon) {
                positive.push_back({traj_graph.edges()[i].u, traj_graph.edges()[i].v, scores[i]});
            }
        }
        std::vector<FrameSpan> spans;
        for (const auto& track : tracks) spans.push_back({track.start_frame(), track.end_frame()});
        const std::vector<int> ids = connected_components_ids(spans, positive);
        const int group_count = ids.empty() ? 0 : *std::max_element(ids.begin(), ids.end()) + 1;
        if (static_cast<std::size_t>(group_count) == tracks.size()) break;
        result.merges += tracks.size() - static_cast<std::size_t>(group_count);
        std::vector<std::vector<Detection>> merged(static_cast<std::size_t>(group_count));
        for (std::size_t t = 0; t < tracks.size(); ++t) {
            auto& dst = merged[static_cast<std::size_t>(ids[t])];
            dst.insert(dst.end(), tracks[t].detections().begin(), tracks[t].detections().end());
        }
        tracks = make_tracks(std::move(merged));
    }
    result.tracks = std::move(tracks);
    return result;
}

std::map<std::int64_t, int> ids_by_index(std::span<const Tracklet> tracks) {
    std::map<std::int64_t, int> out;
    for (const auto& track : tracks) {
        for (const auto& det : track.detections()) out[det.index] = track.id();
    }
    return out;
}

}  // namespace conolink
