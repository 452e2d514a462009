#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "conolink/affinity.hpp"
#include "conolink/error.hpp"
#include "test_support.hpp"

namespace conolink {
namespace {

using testing::det;

TEST(WindowStarts, ThreeWindowsOverSixtyFourFrames) {
    EXPECT_EQ(window_starts(64, WindowPlan{}), (std::vector<int>{0, 16, 32}));
}

TEST(WindowStarts, ShortSpanGetsOneWindow) {
    EXPECT_EQ(window_starts(10, WindowPlan{}), (std::vector<int>{0}));
    EXPECT_EQ(window_starts(32, WindowPlan{}), (std::vector<int>{0}));
    EXPECT_EQ(window_starts(33, WindowPlan{}), (std::vector<int>{0, 16}));
}

TEST(WindowPlan, Validation) {
    EXPECT_THROW(validate(WindowPlan{32, 0, 512}), ValidationError);
    EXPECT_THROW(validate(WindowPlan{32, 40, 512}), ValidationError);
    EXPECT_NO_THROW(validate(WindowPlan{32, 16, 512}));
}

std::vector<const Detection*> pointers(const std::vector<Detection>& dets) {
    std::vector<const Detection*> out;
    for (const auto& d : dets) out.push_back(&d);
    return out;
}

TEST(CosineScorer, MapsCosineToUnitInterval) {
    const std::vector<Detection> dets{det(0, 0, 0, 1, 1, {1, 0}), det(1, 0, 0, 1, 1, {1, 0}),
                                      det(1, 0, 0, 1, 1, {0, 1}), det(2, 0, 0, 1, 1, {-1, 0})};
    const auto ptrs = pointers(dets);
    const Eigen::MatrixXd s = CosineScorer{}.score(ptrs);
    EXPECT_NEAR(s(0, 1), 1.0, 1e-15);
    EXPECT_NEAR(s(0, 2), 0.5, 1e-15);
    EXPECT_NEAR(s(0, 3), 0.0, 1e-15);
    EXPECT_NEAR(s(2, 0), 0.5, 1e-15);
}

TEST(CosineScorer, ZeroEmbeddingIsRejected) {
    const std::vector<Detection> dets{det(0, 0, 0, 1, 1, {0, 0}), det(1, 0, 0, 1, 1, {1, 0})};
    const auto ptrs = pointers(dets);
    EXPECT_THROW(CosineScorer{}.score(ptrs), ValidationError);
}

TEST(OracleScorer, IdEqualityPattern) {
    const std::vector<Detection> dets{det(0, 0, 0, 1, 1, {1}, 1), det(1, 0, 0, 1, 1, {1}, 2),
                                      det(2, 0, 0, 1, 1, {1}, 1)};
    const auto ptrs = pointers(dets);
    const Eigen::MatrixXd s = OracleScorer{}.score(ptrs);
    EXPECT_EQ(s(0, 2), 1.0);
    EXPECT_EQ(s(0, 1), 0.0);
    EXPECT_EQ(s(1, 2), 0.0);
    const std::vector<Detection> unlabeled{det(0, 0, 0, 1, 1), det(1, 0, 0, 1, 1)};
    const auto up = pointers(unlabeled);
    EXPECT_THROW(OracleScorer{}.score(up), ValidationError);
}

// Similarity depends on the window it is computed in, so averaging is observable.
class WindowDependentScorer final : public AffinityScorer {
public:
    static double value(const Detection& a, const Detection& b, int window_first_frame) {
        return static_cast<double>((a.frame * 7 + b.frame * 3 + window_first_frame) % 11) / 10.0;
    }
    Eigen::MatrixXd score(std::span<const Detection* const> window) const override {
        const auto n = static_cast<Eigen::Index>(window.size());
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
        const int first = window.empty() ? 0 : window.front()->frame;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                out(i, j) = value(*window[static_cast<std::size_t>(i)], *window[static_cast<std::size_t>(j)], first);
            }
        }
        return out;
    }
};

DetectionSet random_set(int frames, int per_frame, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> pos(0, 100);
    std::vector<Detection> rows;
    for (int f = 0; f < frames; ++f) {
        for (int k = 0; k < per_frame; ++k) rows.push_back(det(f, pos(rng), pos(rng), 10, 10, {pos(rng), 1.0}));
    }
    return DetectionSet::from(rows, frames);
}

TEST(AccumulateAffinity, MeanOfWindowContributionsMatchesEnumeration) {
    const DetectionSet set = random_set(70, 2, 4);
    const WindowPlan plan;
    const AffinityMatrix m = accumulate_affinity(set, plan, WindowDependentScorer{});
    const auto& all = set.detections();
    for (std::size_t i = 0; i < all.size(); ++i) {
        for (std::size_t j = i + 1; j < all.size(); ++j) {
            if (all[i].frame == all[j].frame) continue;
            double sum = 0.0;
            unsigned count = 0;
            // Independent window enumeration: starts 0, 16, ... until a window reaches frame 69.
            for (int start = 0;; start += plan.step) {
                if (all[i].frame >= start && all[i].frame < start + plan.window && all[j].frame >= start &&
                    all[j].frame < start + plan.window) {
                    sum += WindowDependentScorer::value(all[i], all[j], start);
                    ++count;
                }
                if (start + plan.window >= 70) break;
            }
            EXPECT_EQ(m.count(i, j), count) << i << "," << j;
            if (count > 0) {
                EXPECT_NEAR(m.value(i, j), sum / count, 1e-12);
                EXPECT_NEAR(m.sum(i, j), m.value(i, j) * count, 1e-9);
                EXPECT_TRUE(m.contains(j, i));
            } else {
                EXPECT_EQ(m.value(i, j), 0.0);
                EXPECT_FALSE(m.get(i, j).has_value());
            }
        }
    }
}

TEST(AccumulateAffinity, SingleWindowEqualsScorerBlock) {
    const DetectionSet set = random_set(20, 3, 8);
    const AffinityMatrix m = accumulate_affinity(set, WindowPlan{}, CosineScorer{});
    std::vector<const Detection*> ptrs;
    for (const auto& d : set.detections()) ptrs.push_back(&d);
    const Eigen::MatrixXd block = CosineScorer{}.score(ptrs);
    for (std::size_t i = 0; i < set.size(); ++i) {
        for (std::size_t j = 0; j < set.size(); ++j) {
            if (set.detections()[i].frame == set.detections()[j].frame) continue;
            EXPECT_EQ(m.value(i, j), block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            EXPECT_EQ(m.count(i, j), 1u);
        }
    }
}

TEST(AccumulateAffinity, TwoContributionsAverage) {
    // Frames 17 and 20 share the windows starting at 0 and 16 (T = 32, span 40).
    std::vector<Detection> rows{det(0, 0, 0, 1, 1), det(17, 0, 0, 1, 1), det(20, 0, 0, 1, 1), det(39, 0, 0, 1, 1)};
    const DetectionSet set = DetectionSet::from(rows, 40);
    class Alternating final : public AffinityScorer {
    public:
        Eigen::MatrixXd score(std::span<const Detection* const> window) const override {
            const auto n = static_cast<Eigen::Index>(window.size());
            return Eigen::MatrixXd::Constant(n, n, window.front()->frame == 0 ? 0.4 : 0.6);
        }
    };
    const AffinityMatrix m = accumulate_affinity(set, WindowPlan{}, Alternating{});
    EXPECT_NEAR(m.value(1, 2), 0.5, 1e-15);
    EXPECT_EQ(m.count(1, 2), 2u);
    EXPECT_NEAR(m.value(0, 1), 0.4, 1e-15);
    EXPECT_FALSE(m.contains(0, 3));
}

TEST(AccumulateAffinity, OracleOnesExactlyForSameIdentity) {
    ScenarioSpec spec;
    spec.n_objects = 4;
    spec.n_frames = 80;
    spec.seed = 12;
    const DetectionSet set = synthesize(spec);
    const AffinityMatrix m = accumulate_affinity(set, WindowPlan{}, OracleScorer{});
    const auto& all = set.detections();
    for (std::size_t i = 0; i < all.size(); ++i) {
        for (std::size_t j = i + 1; j < all.size(); ++j) {
            if (!m.contains(i, j)) continue;
            EXPECT_EQ(m.value(i, j) == 1.0, all[i].gt_id == all[j].gt_id);
        }
    }
}

TEST(AccumulateAffinity, ThreadCountDoesNotChangeTheResult) {
    const DetectionSet set = random_set(100, 3, 2);
    const AffinityMatrix a = accumulate_affinity(set, WindowPlan{}, WindowDependentScorer{}, 1);
    const AffinityMatrix b = accumulate_affinity(set, WindowPlan{}, WindowDependentScorer{}, 4);
    ASSERT_EQ(a.entries(), b.entries());
    for (std::size_t i = 0; i < set.size(); ++i) {
        for (std::size_t j = 0; j < set.size(); ++j) EXPECT_EQ(a.sum(i, j), b.sum(i, j));
    }
}

TEST(AccumulateAffinity, SpanLongerThanClipIsRejected) {
    const DetectionSet set = random_set(40, 1, 1);
    EXPECT_THROW(accumulate_affinity(set, WindowPlan{8, 4, 30}, CosineScorer{}), ValidationError);
}

class ConstantScorer final : public AffinityScorer {
public:
    explicit ConstantScorer(double v) : v_(v) {}
    Eigen::MatrixXd score(std::span<const Detection* const> window) const override {
        const auto n = static_cast<Eigen::Index>(window.size());
        return Eigen::MatrixXd::Constant(n, n, v_);
    }

private:
    double v_;
};

TEST(StepCostMatrix, TakesTheLargerCue) {
    // Track member at frame 0, candidate at frame 1 with IoU 0.3 against it.
    // Boxes (0,0,10,10) and (5.3846..,0,10,10): intersection 46.15, union 153.85.
    const double shift = 10.0 * (1.0 - 0.3) / (1.0 + 0.3) * 1.0;
    const DetectionSet set = DetectionSet::from({det(0, 0, 0, 10, 10), det(1, shift, 0, 10, 10)}, 2);
    const AffinityMatrix m = accumulate_affinity(set, WindowPlan{}, ConstantScorer(0.8));
    const std::vector<MemberList> tracks{{0}};
    const StepCosts c = step_cost_matrix(set, tracks, 1, 2, 1, 32, m);
    EXPECT_NEAR(c.overlap(0, 0), 0.3, 1e-12);
    EXPECT_NEAR(c.similarity(0, 0), 0.8, 1e-15);
    EXPECT_NEAR(c.cost(0, 0), -0.8, 1e-15);
}

TEST(StepCostMatrix, StationarySameIdentityCostsMinusOne) {
    const DetectionSet set = DetectionSet::from({det(0, 4, 4, 10, 10, {1}, 1), det(1, 4, 4, 10, 10, {1}, 1)}, 2);
    const AffinityMatrix m = accumulate_affinity(set, WindowPlan{}, OracleScorer{});
    const std::vector<MemberList> tracks{{0}};
    EXPECT_DOUBLE_EQ(step_cost_matrix(set, tracks, 1, 2, 1, 32, m).cost(0, 0), -1.0);
}

TEST(StepCostMatrix, SimilarityIsMeanOverLookbackMembers) {
    // Two members score 0.6 and 1.0 against the candidate; IoU against the last box is 0.7.
    class PairScorer final : public AffinityScorer {
    public:
        Eigen::MatrixXd score(std::span<const Detection* const> window) const override {
            const auto n = static_cast<Eigen::Index>(window.size());
            Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
            out(0, 2) = out(2, 0) = 0.6;
            out(1, 2) = out(2, 1) = 1.0;
            return out;
        }
    };
    const double shift = 10.0 * (1.0 - 0.7) / (1.0 + 0.7);
    const DetectionSet set =
        DetectionSet::from({det(0, 90, 90, 10, 10), det(1, 0, 0, 10, 10), det(2, shift, 0, 10, 10)}, 3);
    const AffinityMatrix m = accumulate_affinity(set, WindowPlan{}, PairScorer{});
    const std::vector<MemberList> tracks{{0, 1}};
    const StepCosts c = step_cost_matrix(set, tracks, 2, 3, 2, 32, m);
    EXPECT_NEAR(c.overlap(0, 0), 0.7, 1e-12);
    EXPECT_NEAR(c.similarity(0, 0), 0.8, 1e-15);
    EXPECT_NEAR(c.cost(0, 0), -0.8, 1e-15);

    // Only the last member is inside a one-frame lookback.
    const StepCosts short_lookback = step_cost_matrix(set, tracks, 2, 3, 2, 1, m);
    EXPECT_NEAR(short_lookback.similarity(0, 0), 1.0, 1e-15);
}

TEST(StepCostMatrix, EntriesStayInMinusOneToZero) {
    const DetectionSet set = random_set(30, 3, 5);
    const AffinityMatrix m = accumulate_affinity(set, WindowPlan{}, WindowDependentScorer{});
    std::vector<MemberList> tracks{{0, 3, 6}, {1, 4}, {2}};
    const auto [begin, end] = set.frame_range(5);
    const StepCosts c = step_cost_matrix(set, tracks, begin, end, 5, 32, m);
    EXPECT_LE(c.cost.maxCoeff(), 0.0);
    EXPECT_GE(c.cost.minCoeff(), -1.0);
}

}  // namespace
}  // namespace conolink
