#include "conolink/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "conolink/error.hpp"

namespace conolink {

void validate(const TrainSchedule& schedule) {
    if (!(schedule.learning_rate >= 0.0) || !std::isfinite(schedule.learning_rate)) {
        throw ValidationError("learning rate must be finite and non-negative");
    }
    if (!(schedule.weight_decay >= 0.0) || !std::isfinite(schedule.weight_decay)) {
        throw ValidationError("weight decay must be finite and non-negative");
    }
    if (schedule.batch == 0) throw ValidationError("batch must be at least 1");
    if (!(schedule.gamma >= 0.0)) throw ValidationError("focal gamma must be non-negative");
}

namespace {

// Cycles through a pool of sample indices, reshuffling after every full pass.
class SampleStream {
public:
    SampleStream(std::vector<std::size_t> pool, std::mt19937_64& rng) : pool_(std::move(pool)), rng_(rng) {}

    bool empty() const { return pool_.empty(); }

    std::size_t next() {
        if (cursor_ == 0) std::shuffle(pool_.begin(), pool_.end(), rng_);
        const std::size_t out = pool_[cursor_];
        cursor_ = (cursor_ + 1) % pool_.size();
        return out;
    }

private:
    std::vector<std::size_t> pool_;
    std::mt19937_64& rng_;
    std::size_t cursor_ = 0;
};

void accumulate(MpnParams& total, MpnParams& part, double weight) {
    auto dst = tensors(total);
    auto src = tensors(part);
    for (std::size_t t = 0; t < dst.size(); ++t) {
        for (std::size_t i = 0; i < dst[t].size(); ++i) dst[t].data[i] += weight * src[t].data[i];
    }
}

}  // namespace

MpnParams train(const std::vector<TrainingSample>& samples, MpnParams params, const TrainSchedule& schedule,
                TrainReport* report, const std::function<void(std::size_t, double)>& on_iteration) {
    validate(schedule);
    params.validate();
    std::vector<std::size_t> first_pool, second_pool;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].graph.edge_count() == 0) continue;
        (samples[i].pass == 2 ? second_pool : first_pool).push_back(i);
    }
    std::mt19937_64 rng(schedule.seed);
    SampleStream first(std::move(first_pool), rng);
    SampleStream second(std::move(second_pool), rng);
    if (schedule.iterations > 0 && first.empty() && second.empty()) {
        throw ValidationError("no labeled training graph with edges");
    }

    auto param_view = tensors(params);
    std::vector<std::vector<double>> m1, m2;
    for (const auto& t : param_view) {
        m1.emplace_back(t.size(), 0.0);
        m2.emplace_back(t.size(), 0.0);
    }
    constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

    for (std::size_t it = 0; it < schedule.iterations; ++it) {
        MpnParams grad = MpnParams::zeros(params.config);
        double objective = 0.0;
        auto run_pass = [&](SampleStream& stream) {
            if (stream.empty()) return;
            const double weight = 1.0 / static_cast<double>(schedule.batch);
            for (std::size_t b = 0; b < schedule.batch; ++b) {
                LossGradient lg;
                try {
                    lg = loss_and_gradient(samples[stream.next()].graph, params, schedule.gamma, weight);
                } catch (const NumericError& e) {
                    throw NumericError("training diverged at iteration " + std::to_string(it) + ": " + e.what());
                }
                objective += lg.loss;
                accumulate(grad, lg.gradient, 1.0);
            }
        };
        run_pass(first);
        if (it >= schedule.second_pass_after || first.empty()) run_pass(second);
        if (!std::isfinite(objective)) {
            throw NumericError("training diverged at iteration " + std::to_string(it));
        }
        if (report) report->loss_curve.push_back(objective);
        if (on_iteration) on_iteration(it, objective);

        auto grad_view = tensors(grad);
        const double step = static_cast<double>(it + 1);
        for (std::size_t t = 0; t < param_view.size(); ++t) {
            double* p = param_view[t].data;
            const double* g = grad_view[t].data;
            for (std::size_t i = 0; i < param_view[t].size(); ++i) {
                const double gi = g[i] + schedule.weight_decay * p[i];
                if (schedule.optimizer == Optimizer::GradientDescent) {
                    p[i] -= schedule.learning_rate * gi;
                } else {
                    m1[t][i] = beta1 * m1[t][i] + (1.0 - beta1) * gi;
                    m2[t][i] = beta2 * m2[t][i] + (1.0 - beta2) * gi * gi;
                    const double mhat = m1[t][i] / (1.0 - std::pow(beta1, step));
                    const double vhat = m2[t][i] / (1.0 - std::pow(beta2, step));
                    p[i] -= schedule.learning_rate * mhat / (std::sqrt(vhat) + adam_eps);
                }
            }
        }
    }
    return params;
}

}  // namespace conolink
