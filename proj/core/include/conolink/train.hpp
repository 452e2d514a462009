#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "conolink/mpn.hpp"

namespace conolink {

enum class Optimizer { GradientDescent, Adam };

struct TrainSchedule {
    std::size_t iterations = 2000;
    double learning_rate = 3e-4;
    double weight_decay = 1e-4;
    Optimizer optimizer = Optimizer::Adam;
    /// Graphs drawn per pass and iteration.
    std::size_t batch = 2;
    /// Second-pass (trajectory graph) losses join the objective from this iteration on.
    std::size_t second_pass_after = 500;
    double gamma = 1.0;
    std::uint64_t seed = 0;
};

void validate(const TrainSchedule& schedule);

/// One labeled graph. Pass 1 graphs are detection-level partial graphs; pass 2
/// graphs connect whole tracklets. Both passes share one parameter set.
struct TrainingSample {
    GraphTensors graph;
    int pass = 1;
};

struct TrainReport {
    std::vector<double> loss_curve;  ///< Objective per iteration.
};

/// Minimizes the summed per-pass mean focal loss with L2 weight decay. Deterministic
/// for a fixed schedule seed. Throws NumericError naming the iteration on divergence.
MpnParams train(const std::vector<TrainingSample>& samples, MpnParams params, const TrainSchedule& schedule,
                TrainReport* report = nullptr,
                const std::function<void(std::size_t, double)>& on_iteration = {});

}  // namespace conolink
