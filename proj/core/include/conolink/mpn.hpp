#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "conolink/types.hpp"

namespace conolink {

/// Affine layer y = W x + b, applied column-wise.
struct Linear {
    Eigen::MatrixXd weight;  ///< out x in
    Eigen::VectorXd bias;    ///< out
};

/// Rectifier between layers, no activation after the last one.
struct Mlp {
    std::vector<Linear> layers;

    Eigen::Index in_dim() const { return layers.front().weight.cols(); }
    Eigen::Index out_dim() const { return layers.back().weight.rows(); }
};

struct MpnConfig {
    std::size_t embed_dim = 16;
    std::size_t node_dim = 32;
    std::size_t edge_dim = 16;
    std::size_t hidden = 64;
    std::size_t steps = 12;
    /// Multiplies the frame-gap feature before the edge encoder.
    double time_scale = 1.0 / 32.0;
};

void validate(const MpnConfig& cfg);

/// Every trainable tensor of the time-aware message-passing network.
///
/// Dimensions (d_v = node_dim, d_e = edge_dim):
///   node_projection  embed_dim       -> d_v
///   edge_encoder     6               -> d_e
///   edge_mlp         2 d_v + 2 d_e   -> d_e   (input [h_u, h_uv, h_uv^0, h_v])
///   past_mlp         2 d_v + d_e     -> d_v   (message into the later node)
///   future_mlp       2 d_v + d_e     -> d_v   (message into the earlier node)
///   node_mlp         2 d_v           -> d_v   (input [sum past, sum future])
///   classifier       d_e             -> 1
struct MpnParams {
    MpnConfig config;
    Linear node_projection;
    Mlp edge_encoder;
    Mlp edge_mlp;
    Mlp past_mlp;
    Mlp future_mlp;
    Mlp node_mlp;
    Mlp classifier;

    /// Uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases.
    static MpnParams initialize(const MpnConfig& cfg, std::uint64_t seed);
    static MpnParams zeros(const MpnConfig& cfg);

    /// Throws ValidationError on broken dimension chaining or non-finite entries.
    void validate() const;
};

/// Mutable view of one tensor inside MpnParams.
struct TensorRef {
    std::string name;
    double* data = nullptr;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t size() const noexcept { return rows * cols; }
};

/// All tensors in a fixed order (the checkpoint order).
std::vector<TensorRef> tensors(MpnParams& params);
std::size_t parameter_count(const MpnParams& params);

/// Dense inputs for one graph.
struct GraphTensors {
    Eigen::MatrixXd node_embeddings;  ///< embed_dim x nodes
    Eigen::MatrixXd edge_features;    ///< 6 x edges, raw init features
    std::vector<Eigen::Index> u;
    std::vector<Eigen::Index> v;
    std::vector<double> labels;       ///< empty, or one 0/1 per edge

    Eigen::Index node_count() const { return node_embeddings.cols(); }
    Eigen::Index edge_count() const { return edge_features.cols(); }

    static GraphTensors from(const TrackGraph& graph);
};

/// Node and edge embeddings after a number of message-passing steps.
struct EmbeddingState {
    std::size_t step = 0;
    Eigen::MatrixXd nodes;         ///< d_v x nodes
    Eigen::MatrixXd edges;         ///< d_e x edges
    Eigen::MatrixXd initial_edges; ///< d_e x edges, step-0 edge embeddings

    /// [h_uv^(s); h_uv^(0)], the skip-concatenated edge state.
    Eigen::MatrixXd edge_concat() const;
};

struct ForwardResult {
    EmbeddingState state;
    Eigen::VectorXd logits;
    Eigen::VectorXd scores;  ///< logistic(logits), in (0, 1)
    /// Per-step states, filled only when requested.
    std::vector<EmbeddingState> history;
};

ForwardResult forward(const GraphTensors& graph, const MpnParams& params, bool keep_history = false);

/// Signs (1 = active) of every hidden rectifier pre-activation of a forward pass, in
/// evaluation order. Two parameter points with equal patterns lie in the same linear
/// region of every hidden layer.
std::vector<std::uint8_t> activation_pattern(const GraphTensors& graph, const MpnParams& params);

/// Convenience: scores per edge of `graph`, in edge order.
std::vector<double> score_edges(const TrackGraph& graph, const MpnParams& params);

inline constexpr double kFocalClamp = 1e-7;

/// Mean over edges of -(1 - p_t)^gamma * log(p_t), p_t = score for label 1 and
/// 1 - score for label 0. Scores are clamped to [1e-7, 1 - 1e-7].
double focal_loss(std::span<const double> scores, std::span<const double> labels, double gamma = 1.0);

struct LossGradient {
    double loss = 0.0;
    MpnParams gradient;
};

/// Exact gradient of `scale * focal_loss` on the graph's labels by reverse
/// accumulation through the message-passing steps.
LossGradient loss_and_gradient(const GraphTensors& graph, const MpnParams& params, double gamma = 1.0,
                               double scale = 1.0);

/// Versioned binary checkpoint: little-endian float32 values with a shapes header.
void save_checkpoint(const MpnParams& params, const std::filesystem::path& path);
MpnParams load_checkpoint(const std::filesystem::path& path);

}  // namespace conolink
