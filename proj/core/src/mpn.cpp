#include "conolink/mpn.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "conolink/error.hpp"

namespace conolink {

namespace {

Linear make_linear(Eigen::Index in, Eigen::Index out, std::mt19937_64* rng) {
    Linear layer{Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)};
    if (rng != nullptr) {
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (Eigen::Index c = 0; c < in; ++c) {
            for (Eigen::Index r = 0; r < out; ++r) layer.weight(r, c) = dist(*rng);
        }
    }
    return layer;
}

Mlp make_mlp(Eigen::Index in, Eigen::Index hidden, Eigen::Index out, std::mt19937_64* rng) {
    Mlp mlp;
    mlp.layers.push_back(make_linear(in, hidden, rng));
    mlp.layers.push_back(make_linear(hidden, out, rng));
    return mlp;
}

MpnParams build(const MpnConfig& cfg, std::mt19937_64* rng) {
    validate(cfg);
    const auto d = static_cast<Eigen::Index>(cfg.embed_dim);
    const auto nv = static_cast<Eigen::Index>(cfg.node_dim);
    const auto ne = static_cast<Eigen::Index>(cfg.edge_dim);
    const auto h = static_cast<Eigen::Index>(cfg.hidden);
    MpnParams p;
    p.config = cfg;
    p.node_projection = make_linear(d, nv, rng);
    p.edge_encoder = make_mlp(static_cast<Eigen::Index>(kEdgeFeatureDim), h, ne, rng);
    p.edge_mlp = make_mlp(2 * nv + 2 * ne, h, ne, rng);
    p.past_mlp = make_mlp(2 * nv + ne, h, nv, rng);
    p.future_mlp = make_mlp(2 * nv + ne, h, nv, rng);
    p.node_mlp = make_mlp(2 * nv, h, nv, rng);
    p.classifier = make_mlp(ne, h, 1, rng);
    return p;
}

struct MlpCache {
    std::vector<Eigen::MatrixXd> inputs;  // input of each layer
    std::vector<Eigen::MatrixXd> pre;     // pre-activation of each hidden layer
};

Eigen::MatrixXd apply(const Linear& layer, const Eigen::MatrixXd& x) {
    Eigen::MatrixXd y = layer.weight * x;
    y.colwise() += layer.bias;
    return y;
}

Eigen::MatrixXd mlp_forward(const Mlp& mlp, Eigen::MatrixXd x, MlpCache* cache) {
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
        Eigen::MatrixXd y = apply(mlp.layers[l], x);
        if (cache) cache->inputs.push_back(std::move(x));
        if (l + 1 < mlp.layers.size()) {
            if (cache) cache->pre.push_back(y);
            x = y.cwiseMax(0.0);
        } else {
            x = std::move(y);
        }
    }
    return x;
}

// Accumulates parameter gradients into `grad` and returns d(loss)/d(input).
Eigen::MatrixXd mlp_backward(const Mlp& mlp, const MlpCache& cache, Eigen::MatrixXd dy, Mlp& grad) {
    for (std::size_t l = mlp.layers.size(); l-- > 0;) {
        if (l + 1 < mlp.layers.size()) {
            dy = dy.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
        }
        grad.layers[l].weight.noalias() += dy * cache.inputs[l].transpose();
        grad.layers[l].bias += dy.rowwise().sum();
        dy = mlp.layers[l].weight.transpose() * dy;
    }
    return dy;
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& source, const std::vector<Eigen::Index>& index) {
    Eigen::MatrixXd out(source.rows(), static_cast<Eigen::Index>(index.size()));
    for (std::size_t e = 0; e < index.size(); ++e) out.col(static_cast<Eigen::Index>(e)) = source.col(index[e]);
    return out;
}

void scatter_add(Eigen::MatrixXd& target, const Eigen::MatrixXd& values, const std::vector<Eigen::Index>& index) {
    for (std::size_t e = 0; e < index.size(); ++e) target.col(index[e]) += values.col(static_cast<Eigen::Index>(e));
}

Eigen::MatrixXd stack(std::initializer_list<const Eigen::MatrixXd*> parts) {
    Eigen::Index rows = 0;
    const Eigen::Index cols = (*parts.begin())->cols();
    for (const auto* p : parts) rows += p->rows();
    Eigen::MatrixXd out(rows, cols);
    Eigen::Index offset = 0;
    for (const auto* p : parts) {
        out.middleRows(offset, p->rows()) = *p;
        offset += p->rows();
    }
    return out;
}

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

Eigen::MatrixXd scaled_features(const GraphTensors& graph, const MpnParams& params) {
    Eigen::MatrixXd features = graph.edge_features;
    if (features.rows() > 4) features.row(4) *= params.config.time_scale;
    return features;
}

struct StepCache {
    MlpCache edge, past, future, node;
};

void check_finite(const Eigen::MatrixXd& m, std::size_t step, const char* what) {
    if (!m.allFinite()) {
        throw NumericError(std::string("non-finite ") + what + " at message-passing step " + std::to_string(step));
    }
}

void check_inputs(const GraphTensors& graph, const MpnParams& params) {
    if (graph.node_embeddings.rows() != static_cast<Eigen::Index>(params.config.embed_dim) && graph.node_count() > 0) {
        throw LengthError("node embedding dimension " + std::to_string(graph.node_embeddings.rows()) +
                          " does not match network input " + std::to_string(params.config.embed_dim));
    }
    if (graph.edge_count() > 0 && graph.edge_features.rows() != static_cast<Eigen::Index>(kEdgeFeatureDim)) {
        throw LengthError("edge feature dimension mismatch");
    }
    if (graph.u.size() != static_cast<std::size_t>(graph.edge_count()) ||
        graph.v.size() != static_cast<std::size_t>(graph.edge_count())) {
        throw LengthError("edge index arrays do not match edge count");
    }
}

struct FullForward {
    ForwardResult result;
    Eigen::MatrixXd node_input;       // node embeddings
    Eigen::MatrixXd encoder_out;      // h^(0) of edges
    MlpCache encoder;
    MlpCache classifier;
    std::vector<StepCache> steps;
};

FullForward run_forward(const GraphTensors& graph, const MpnParams& params, bool cache, bool keep_history) {
    check_inputs(graph, params);
    const auto& cfg = params.config;
    const Eigen::Index n = graph.node_count();
    const Eigen::Index m = graph.edge_count();
    FullForward out;

    Eigen::MatrixXd h_nodes = n > 0 ? apply(params.node_projection, graph.node_embeddings)
                                    : Eigen::MatrixXd(static_cast<Eigen::Index>(cfg.node_dim), 0);
    Eigen::MatrixXd h0_edges = m > 0 ? mlp_forward(params.edge_encoder, scaled_features(graph, params),
                                                   cache ? &out.encoder : nullptr)
                                     : Eigen::MatrixXd(static_cast<Eigen::Index>(cfg.edge_dim), 0);
    check_finite(h_nodes, 0, "node embedding");
    check_finite(h0_edges, 0, "edge embedding");
    Eigen::MatrixXd h_edges = h0_edges;
    if (keep_history) out.result.history.push_back({0, h_nodes, h_edges, h0_edges});

    for (std::size_t s = 1; s <= cfg.steps; ++s) {
        StepCache* sc = nullptr;
        if (cache) sc = &out.steps.emplace_back();
        const Eigen::MatrixXd hu = gather(h_nodes, graph.u);
        const Eigen::MatrixXd hv = gather(h_nodes, graph.v);
        Eigen::MatrixXd new_edges = mlp_forward(params.edge_mlp, stack({&hu, &h_edges, &h0_edges, &hv}),
                                                sc ? &sc->edge : nullptr);
        const Eigen::MatrixXd to_later =
            mlp_forward(params.past_mlp, stack({&hu, &new_edges, &hv}), sc ? &sc->past : nullptr);
        const Eigen::MatrixXd to_earlier =
            mlp_forward(params.future_mlp, stack({&hv, &new_edges, &hu}), sc ? &sc->future : nullptr);
        Eigen::MatrixXd past_sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cfg.node_dim), n);
        Eigen::MatrixXd future_sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cfg.node_dim), n);
        scatter_add(past_sum, to_later, graph.v);
        scatter_add(future_sum, to_earlier, graph.u);
        h_nodes = mlp_forward(params.node_mlp, stack({&past_sum, &future_sum}), sc ? &sc->node : nullptr);
        h_edges = std::move(new_edges);
        check_finite(h_nodes, s, "node embedding");
        check_finite(h_edges, s, "edge embedding");
        if (keep_history) out.result.history.push_back({s, h_nodes, h_edges, h0_edges});
    }

    Eigen::VectorXd logits = Eigen::VectorXd::Zero(m);
    if (m > 0) logits = mlp_forward(params.classifier, h_edges, cache ? &out.classifier : nullptr).row(0).transpose();
    if (!logits.allFinite()) throw NumericError("non-finite edge logits after message passing");
    out.result.logits = logits;
    out.result.scores = logits.unaryExpr([](double z) { return sigmoid(z); });
    out.result.state = {cfg.steps, std::move(h_nodes), std::move(h_edges), h0_edges};
    out.node_input = graph.node_embeddings;
    out.encoder_out = std::move(h0_edges);
    return out;
}

// d(focal)/d(logit) for one edge.
double focal_logit_gradient(double logit, double label, double gamma) {
    const double p = sigmoid(logit);
    if (p < kFocalClamp || p > 1.0 - kFocalClamp) return 0.0;
    const double pt = label > 0.5 ? p : 1.0 - p;
    const double dpt_dz = (label > 0.5 ? 1.0 : -1.0) * p * (1.0 - p);
    const double q = 1.0 - pt;
    double dl_dpt = -std::pow(q, gamma) / pt;
    if (gamma != 0.0) dl_dpt += gamma * std::pow(q, gamma - 1.0) * std::log(pt);
    return dl_dpt * dpt_dz;
}

}  // namespace

void validate(const MpnConfig& cfg) {
    if (cfg.embed_dim == 0 || cfg.node_dim == 0 || cfg.edge_dim == 0 || cfg.hidden == 0) {
        throw ValidationError("network dimensions must be positive");
    }
    if (cfg.steps < 1) throw ValidationError("message-passing steps must be at least 1");
    if (!std::isfinite(cfg.time_scale)) throw ValidationError("time_scale must be finite");
}

MpnParams MpnParams::initialize(const MpnConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return build(cfg, &rng);
}

MpnParams MpnParams::zeros(const MpnConfig& cfg) { return build(cfg, nullptr); }

void MpnParams::validate() const {
    conolink::validate(config);
    const MpnParams reference = zeros(config);
    auto same_shape = [](const Mlp& a, const Mlp& b) {
        if (a.layers.size() != b.layers.size()) return false;
        for (std::size_t l = 0; l < a.layers.size(); ++l) {
            if (a.layers[l].weight.rows() != b.layers[l].weight.rows() ||
                a.layers[l].weight.cols() != b.layers[l].weight.cols() ||
                a.layers[l].bias.size() != b.layers[l].bias.size()) {
                return false;
            }
        }
        return true;
    };
    if (node_projection.weight.rows() != reference.node_projection.weight.rows() ||
        node_projection.weight.cols() != reference.node_projection.weight.cols() ||
        node_projection.bias.size() != reference.node_projection.bias.size() ||
        !same_shape(edge_encoder, reference.edge_encoder) || !same_shape(edge_mlp, reference.edge_mlp) ||
        !same_shape(past_mlp, reference.past_mlp) || !same_shape(future_mlp, reference.future_mlp) ||
        !same_shape(node_mlp, reference.node_mlp) || !same_shape(classifier, reference.classifier)) {
        throw ValidationError("network tensors do not chain with the configured dimensions");
    }
    for (const auto& t : tensors(const_cast<MpnParams&>(*this))) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (!std::isfinite(t.data[i])) throw ValidationError("non-finite parameter in " + t.name);
        }
    }
}

std::vector<TensorRef> tensors(MpnParams& params) {
    std::vector<TensorRef> out;
    auto add = [&out](std::string name, Eigen::MatrixXd& m) {
        out.push_back({std::move(name), m.data(), static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
    };
    auto add_vec = [&out](std::string name, Eigen::VectorXd& v) {
        out.push_back({std::move(name), v.data(), static_cast<std::size_t>(v.size()), 1});
    };
    add("node_projection.weight", params.node_projection.weight);
    add_vec("node_projection.bias", params.node_projection.bias);
    const std::pair<const char*, Mlp*> mlps[] = {
        {"edge_encoder", &params.edge_encoder}, {"edge_mlp", &params.edge_mlp}, {"past_mlp", &params.past_mlp},
        {"future_mlp", &params.future_mlp},   {"node_mlp", &params.node_mlp}, {"classifier", &params.classifier},
    };
    for (const auto& [name, mlp] : mlps) {
        for (std::size_t l = 0; l < mlp->layers.size(); ++l) {
            auto& layer = mlp->layers[l];
            const std::string prefix = std::string(name) + "." + std::to_string(l);
            add(prefix + ".weight", layer.weight);
            add_vec(prefix + ".bias", layer.bias);
        }
    }
    return out;
}

std::size_t parameter_count(const MpnParams& params) {
    std::size_t total = 0;
    for (const auto& t : tensors(const_cast<MpnParams&>(params))) total += t.size();
    return total;
}

GraphTensors GraphTensors::from(const TrackGraph& graph) {
    GraphTensors out;
    const auto& nodes = graph.nodes();
    const auto& edges = graph.edges();
    const auto dim = nodes.empty() ? Eigen::Index{0} : static_cast<Eigen::Index>(nodes.front().embedding().size());
    out.node_embeddings.resize(dim, static_cast<Eigen::Index>(nodes.size()));
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& emb = nodes[i].embedding();
        if (static_cast<Eigen::Index>(emb.size()) != dim) throw LengthError("inconsistent node embedding dimensions");
        for (Eigen::Index k = 0; k < dim; ++k) out.node_embeddings(k, static_cast<Eigen::Index>(i)) = emb[static_cast<std::size_t>(k)];
    }
    out.edge_features.resize(static_cast<Eigen::Index>(kEdgeFeatureDim), static_cast<Eigen::Index>(edges.size()));
    bool all_labeled = !edges.empty();
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto& edge = edges[e];
        if (edge.init_features.size() != kEdgeFeatureDim) throw LengthError("edge has wrong feature dimension");
        for (std::size_t k = 0; k < kEdgeFeatureDim; ++k) {
            out.edge_features(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(e)) = edge.init_features[k];
        }
        out.u.push_back(static_cast<Eigen::Index>(edge.u));
        out.v.push_back(static_cast<Eigen::Index>(edge.v));
        all_labeled = all_labeled && edge.label.has_value();
    }
    if (all_labeled) {
        for (const auto& edge : edges) out.labels.push_back(static_cast<double>(*edge.label));
    }
    return out;
}

Eigen::MatrixXd EmbeddingState::edge_concat() const {
    Eigen::MatrixXd out(edges.rows() + initial_edges.rows(), edges.cols());
    out.topRows(edges.rows()) = edges;
    out.bottomRows(initial_edges.rows()) = initial_edges;
    return out;
}

ForwardResult forward(const GraphTensors& graph, const MpnParams& params, bool keep_history) {
    return run_forward(graph, params, false, keep_history).result;
}

std::vector<std::uint8_t> activation_pattern(const GraphTensors& graph, const MpnParams& params) {
    const FullForward fwd = run_forward(graph, params, true, false);
    std::vector<std::uint8_t> out;
    auto append = [&out](const MlpCache& cache) {
        for (const auto& pre : cache.pre) {
            for (Eigen::Index i = 0; i < pre.size(); ++i) out.push_back(pre.data()[i] > 0.0 ? 1 : 0);
        }
    };
    append(fwd.encoder);
    for (const auto& step : fwd.steps) {
        append(step.edge);
        append(step.past);
        append(step.future);
        append(step.node);
    }
    append(fwd.classifier);
    return out;
}

std::vector<double> score_edges(const TrackGraph& graph, const MpnParams& params) {
    if (graph.edge_count() == 0) return {};
    const ForwardResult result = forward(GraphTensors::from(graph), params);
    return {result.scores.data(), result.scores.data() + result.scores.size()};
}

double focal_loss(std::span<const double> scores, std::span<const double> labels, double gamma) {
    if (scores.size() != labels.size()) throw LengthError("scores and labels differ in length");
    if (scores.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double p = std::clamp(scores[i], kFocalClamp, 1.0 - kFocalClamp);
        const double pt = labels[i] > 0.5 ? p : 1.0 - p;
        total += -std::pow(1.0 - pt, gamma) * std::log(pt);
    }
    return total / static_cast<double>(scores.size());
}

LossGradient loss_and_gradient(const GraphTensors& graph, const MpnParams& params, double gamma, double scale) {
    LossGradient out{0.0, MpnParams::zeros(params.config)};
    const Eigen::Index m = graph.edge_count();
    if (m == 0) return out;
    if (graph.labels.size() != static_cast<std::size_t>(m)) throw LengthError("every edge needs a label for training");

    FullForward fwd = run_forward(graph, params, true, false);
    const auto& scores = fwd.result.scores;
    out.loss = scale * focal_loss(std::span<const double>(scores.data(), static_cast<std::size_t>(m)), graph.labels, gamma);

    MpnParams& grad = out.gradient;
    const auto& cfg = params.config;
    const auto nv = static_cast<Eigen::Index>(cfg.node_dim);
    const auto ne = static_cast<Eigen::Index>(cfg.edge_dim);
    const Eigen::Index n = graph.node_count();

    Eigen::MatrixXd d_logits(1, m);
    for (Eigen::Index e = 0; e < m; ++e) {
        d_logits(0, e) = scale * focal_logit_gradient(fwd.result.logits(e), graph.labels[static_cast<std::size_t>(e)], gamma) /
                         static_cast<double>(m);
    }
    Eigen::MatrixXd d_edges = mlp_backward(params.classifier, fwd.classifier, d_logits, grad.classifier);
    Eigen::MatrixXd d_nodes = Eigen::MatrixXd::Zero(nv, n);
    Eigen::MatrixXd d_initial = Eigen::MatrixXd::Zero(ne, m);

    for (std::size_t s = cfg.steps; s-- > 0;) {
        const StepCache& sc = fwd.steps[s];
        const Eigen::MatrixXd d_node_in = mlp_backward(params.node_mlp, sc.node, d_nodes, grad.node_mlp);
        const Eigen::MatrixXd d_past_sum = d_node_in.topRows(nv);
        const Eigen::MatrixXd d_future_sum = d_node_in.bottomRows(nv);

        const Eigen::MatrixXd d_past_in = mlp_backward(params.past_mlp, sc.past, gather(d_past_sum, graph.v), grad.past_mlp);
        const Eigen::MatrixXd d_future_in =
            mlp_backward(params.future_mlp, sc.future, gather(d_future_sum, graph.u), grad.future_mlp);

        Eigen::MatrixXd d_prev_nodes = Eigen::MatrixXd::Zero(nv, n);
        // past input [h_u, h_uv, h_v]; future input [h_v, h_uv, h_u].
        scatter_add(d_prev_nodes, d_past_in.topRows(nv), graph.u);
        scatter_add(d_prev_nodes, d_past_in.bottomRows(nv), graph.v);
        scatter_add(d_prev_nodes, d_future_in.topRows(nv), graph.v);
        scatter_add(d_prev_nodes, d_future_in.bottomRows(nv), graph.u);
        d_edges += d_past_in.middleRows(nv, ne) + d_future_in.middleRows(nv, ne);

        // edge input [h_u, h_uv, h_uv^0, h_v].
        const Eigen::MatrixXd d_edge_in = mlp_backward(params.edge_mlp, sc.edge, d_edges, grad.edge_mlp);
        scatter_add(d_prev_nodes, d_edge_in.topRows(nv), graph.u);
        scatter_add(d_prev_nodes, d_edge_in.bottomRows(nv), graph.v);
        d_edges = d_edge_in.middleRows(nv, ne);
        d_initial += d_edge_in.middleRows(nv + ne, ne);
        d_nodes = std::move(d_prev_nodes);
    }
    d_initial += d_edges;  // h^(0) also seeded the first edge state.

    grad.node_projection.weight.noalias() += d_nodes * fwd.node_input.transpose();
    grad.node_projection.bias += d_nodes.rowwise().sum();
    mlp_backward(params.edge_encoder, fwd.encoder, d_initial, grad.edge_encoder);
    return out;
}

}  // namespace conolink
