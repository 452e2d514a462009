#include <numeric>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "conolink/graph_builder.hpp"
#include "conolink/metrics.hpp"
#include "conolink/pipeline.hpp"
#include "test_support.hpp"

namespace conolink {
namespace {

using testing::det;

// Horizontal shift giving IoU r between two 10x10 boxes.
double shift_for(double r) { return 10.0 * (1.0 - r) / (1.0 + r); }

Tracklet track(int id, int first, int last, double x = 0.0) {
    std::vector<Detection> dets;
    for (int f = first; f <= last; ++f) dets.push_back(det(f, x, 0, 10, 10));
    return Tracklet(id, dets);
}

TEST(MatchFrames, PerfectPrediction) {
    const std::vector<Tracklet> gt{track(1, 0, 9), track(2, 0, 9, 100)};
    const Correspondence c = match_frames(gt, gt);
    EXPECT_EQ(c.tp, 20u);
    EXPECT_EQ(c.fp, 0u);
    EXPECT_EQ(c.fn, 0u);
    EXPECT_EQ(c.ids, 0u);
    EXPECT_EQ(mota(c), 1.0);
    EXPECT_EQ(idf1(gt, gt), 1.0);
}

TEST(MatchFrames, EmptyPrediction) {
    const std::vector<Tracklet> gt{track(1, 0, 9)};
    const Correspondence c = match_frames({}, gt);
    EXPECT_EQ(c.fn, 10u);
    EXPECT_EQ(mota(c), 0.0);
    EXPECT_EQ(idf1({}, gt), 0.0);
}

TEST(MatchFrames, GateDecidesBetweenTwoCandidates) {
    const std::vector<Tracklet> gt{track(1, 0, 0)};
    const std::vector<Tracklet> pred{track(5, 0, 0, shift_for(0.6)), track(6, 0, 0, -shift_for(0.4))};
    const Correspondence c = match_frames(pred, gt);
    EXPECT_EQ(c.tp, 1u);
    EXPECT_EQ(c.fp, 1u);
    EXPECT_EQ(c.fn, 0u);
    ASSERT_EQ(c.frames.size(), 1u);
    ASSERT_EQ(c.frames[0].pairs.size(), 1u);
    EXPECT_EQ(c.frames[0].pairs[0].pred_id, 5);
    EXPECT_NEAR(c.frames[0].pairs[0].iou, 0.6, 1e-12);
}

TEST(Mota, OneMissOneFalsePositive) {
    // Ten gt boxes; the prediction misses frame 4 and adds a stray box in frame 7.
    const std::vector<Tracklet> gt{track(1, 0, 9)};
    std::vector<Detection> dets;
    for (int f = 0; f <= 9; ++f) {
        if (f != 4) dets.push_back(det(f, 0, 0, 10, 10));
    }
    const std::vector<Tracklet> pred{Tracklet(3, dets), track(4, 7, 7, 200)};
    const Correspondence c = match_frames(pred, gt);
    EXPECT_EQ(c.fn, 1u);
    EXPECT_EQ(c.fp, 1u);
    EXPECT_EQ(c.ids, 0u);
    EXPECT_NEAR(*mota(c), 0.8, 1e-15);
}

TEST(Mota, AllMissed) {
    const std::vector<Tracklet> gt{track(1, 0, 3)};
    const std::vector<Tracklet> pred{track(2, 0, 3, 300)};
    const Correspondence c = match_frames(pred, gt);
    EXPECT_EQ(c.fp, 4u);
    EXPECT_EQ(mota(match_frames({}, gt)), 0.0);
    EXPECT_FALSE(mota(match_frames(pred, {})).has_value());
}

// 5 frames, two far-apart objects; the prediction for object 1 changes id at frame 3.
std::pair<std::vector<Tracklet>, std::vector<Tracklet>> switch_toy() {
    std::vector<Tracklet> gt{track(1, 0, 4), track(2, 0, 4, 100)};
    std::vector<Tracklet> pred{track(10, 0, 2), track(11, 3, 4), track(20, 0, 4, 100)};
    return {pred, gt};
}

TEST(IdentitySwitch, InducedSwitchCountsOnce) {
    const auto [pred, gt] = switch_toy();
    const Correspondence c = match_frames(pred, gt);
    EXPECT_EQ(c.ids, 1u);
    EXPECT_EQ(c.tp, 10u);
    EXPECT_NEAR(*mota(c), 0.9, 1e-15);
    EXPECT_EQ(c.frames[3].ids, 1u);
}

TEST(IdentitySwitch, DisappearingTrackIsNotASwitch) {
    const std::vector<Tracklet> gt{track(1, 0, 4)};
    const std::vector<Tracklet> pred{track(7, 0, 2)};
    const Correspondence c = match_frames(pred, gt);
    EXPECT_EQ(c.ids, 0u);
    EXPECT_EQ(c.fn, 2u);
}

TEST(IdentitySwitch, KeepsThePreviousPartnerWhileItStaysAboveTheGate) {
    // Pred 8 drifts but stays above the gate; pred 9 is a perfect fit from frame 2.
    const std::vector<Tracklet> gt{track(1, 0, 4)};
    std::vector<Detection> drift;
    for (int f = 0; f <= 4; ++f) drift.push_back(det(f, f >= 2 ? shift_for(0.55) : 0.0, 0, 10, 10));
    const std::vector<Tracklet> pred{Tracklet(8, drift), track(9, 2, 4)};
    const Correspondence c = match_frames(pred, gt);
    EXPECT_EQ(c.ids, 0u);
    EXPECT_EQ(c.fp, 3u);
}

TEST(Idf1, OnePredictionCoveringTwoIdentities) {
    const std::vector<Tracklet> gt{track(1, 0, 4), track(2, 5, 9)};
    const std::vector<Tracklet> pred{track(3, 0, 9)};
    const IdentityCounts counts = identity_counts(pred, gt);
    EXPECT_EQ(counts.idtp, 5u);
    EXPECT_EQ(counts.idfp, 5u);
    EXPECT_EQ(counts.idfn, 5u);
    EXPECT_DOUBLE_EQ(idf1(pred, gt), 0.5);
    EXPECT_DOUBLE_EQ(idf1({}, {}), 1.0);
}

TEST(Metrics, InvariantUnderPredictionRelabeling) {
    ScenarioSpec spec;
    spec.n_objects = 6;
    spec.n_frames = 120;
    spec.seed = 3;
    spec.embedding_noise_sigma = 0.3;
    spec.miss_rate = 0.1;
    spec.occlusions = random_occlusions(6, 120, 2, 10, 3);
    const Scenario s = simulate(spec);
    TrackerConfig cfg;
    const auto pred = track_sequence(s.detections, cfg, CosineScorer{}, HandcraftedEdgeScorer{}).tracks;
    const double base_mota = *mota(match_frames(pred, s.ground_truth));
    const double base_idf1 = idf1(pred, s.ground_truth);
    std::vector<int> labels(pred.size());
    std::iota(labels.begin(), labels.end(), 50);
    std::mt19937_64 rng(4);
    std::shuffle(labels.begin(), labels.end(), rng);
    std::vector<Tracklet> relabeled = pred;
    for (std::size_t i = 0; i < relabeled.size(); ++i) relabeled[i].set_id(labels[i]);
    EXPECT_DOUBLE_EQ(*mota(match_frames(relabeled, s.ground_truth)), base_mota);
    EXPECT_DOUBLE_EQ(idf1(relabeled, s.ground_truth), base_idf1);
}

TEST(GraphStats, CountsByKind) {
    EXPECT_EQ(graph_stats(TrackGraph{}).edge_count, 0u);
    EXPECT_EQ(graph_stats(TrackGraph{}).node_count, 0u);
    const DetectionSet set =
        DetectionSet::from({det(0, 0, 0, 5, 5, {1, 0}, 1), det(1, 0, 0, 5, 5, {1, 0}, 1), det(2, 0, 0, 5, 5, {1, 0}, 1)}, 3);
    Association a;
    for (std::size_t i = 0; i < 3; ++i) a.tracklets.emplace_back(static_cast<int>(i), std::vector<Detection>{set.detections()[i]});
    a.links = {{0, 1}, {1, 2}};
    const GraphStats stats = graph_stats(build_part_graph(a, set, 32));
    EXPECT_EQ(stats.det_det, 2u);
    EXPECT_EQ(stats.edge_count, 2u);
    EXPECT_EQ(stats.det_nodes, 3u);
    EXPECT_EQ(stats.traj_nodes, 0u);
    GraphStats sum = stats;
    sum += stats;
    EXPECT_EQ(sum.det_det, 4u);
}

TEST(Evaluate, ReportAndKeyValueDump) {
    const auto [pred, gt] = switch_toy();
    const EvalReport r = evaluate(pred, gt);
    EXPECT_EQ(r.ids, 1u);
    EXPECT_EQ(r.gt_count, 10u);
    EXPECT_FALSE(r.frame_range_mismatch);
    std::ostringstream kv;
    write_report_kv(r, kv);
    EXPECT_EQ(kv.str().rfind("mota=0.900000\nidf1=", 0), 0u);
    EXPECT_NE(kv.str().find("ids=1\nfp=0\nfn=0\ngt_count=10\n"), std::string::npos);

    const std::vector<Tracklet> late{track(1, 20, 22)};
    EXPECT_TRUE(evaluate(late, gt).frame_range_mismatch);
}

}  // namespace
}  // namespace conolink
