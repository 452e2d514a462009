#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "conolink/error.hpp"
#include "conolink/geometry.hpp"
#include "conolink/ingest.hpp"
#include "test_support.hpp"

namespace conolink {
namespace {

using testing::det;
using testing::TempDir;
using testing::write_text;

TEST(ParseMot, MapsFieldsDirectly) {
    TempDir dir("parse");
    write_text(dir / "det.txt", "1,3,10,20,5,8,0.9,-1,-1,-1\n");
    const DetectionSet set = parse_mot(dir / "det.txt");
    ASSERT_EQ(set.size(), 1u);
    const Detection& d = set.detections()[0];
    EXPECT_EQ(d.frame, 0);
    EXPECT_EQ(d.box, (BoundingBox{10, 20, 5, 8}));
    EXPECT_DOUBLE_EQ(d.confidence, 0.9);
    ASSERT_TRUE(d.gt_id.has_value());
    EXPECT_EQ(*d.gt_id, 3);
    EXPECT_EQ(d.embedding.size(), kDefaultEmbeddingDim);
    EXPECT_TRUE(set.has_gt());
}

TEST(ParseMot, EmptyFile) {
    TempDir dir("parse");
    write_text(dir / "det.txt", "");
    const DetectionSet set = parse_mot(dir / "det.txt");
    EXPECT_EQ(set.size(), 0u);
    EXPECT_EQ(set.n_frames(), 0);
}

TEST(ParseMot, UnknownIdsMeanNoGroundTruth) {
    TempDir dir("parse");
    write_text(dir / "det.txt", "1,-1,0,0,5,5,1\n2,-1,1,1,5,5,1\n");
    EXPECT_FALSE(parse_mot(dir / "det.txt").has_gt());
}

TEST(ParseMot, ErrorsCarryTheLineNumber) {
    TempDir dir("parse");
    write_text(dir / "det.txt", "1,1,0,0,5,5,1\n\n2,1,0,0,5\n");
    try {
        parse_mot(dir / "det.txt");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    write_text(dir / "bad.txt", "1,1,0,0,5,abc,1\n");
    EXPECT_THROW(parse_mot(dir / "bad.txt"), ParseError);
    write_text(dir / "neg.txt", "1,1,0,0,-5,5,1\n");
    EXPECT_THROW(parse_mot(dir / "neg.txt"), ParseError);
    write_text(dir / "zero.txt", "0,1,0,0,5,5,1\n");
    EXPECT_THROW(parse_mot(dir / "zero.txt"), ParseError);
}

TEST(ParseMot, MissingFileIsAnIoError) {
    EXPECT_THROW(parse_mot("/nonexistent/det.txt"), IoError);
}

TEST(ParseMot, SidecarRowCountMustMatch) {
    TempDir dir("parse");
    write_text(dir / "det.txt", "1,-1,0,0,5,5,1\n2,-1,1,1,5,5,1\n");
    const std::vector<Detection> one{det(0, 0, 0, 5, 5, {1, 2, 3})};
    write_embeddings(one, dir / "det.emb");
    EXPECT_THROW(parse_mot(dir / "det.txt", dir / "det.emb"), LengthError);
}

TEST(ParseMot, SidecarRowsFollowFileOrder) {
    TempDir dir("parse");
    // Rows deliberately out of canonical order.
    write_text(dir / "det.txt", "2,-1,0,0,5,5,1\n1,-1,9,9,5,5,1\n");
    const std::vector<Detection> rows{det(1, 0, 0, 5, 5, {1, 0}), det(0, 9, 9, 5, 5, {0, 1})};
    write_embeddings(rows, dir / "det.emb");
    const DetectionSet set = parse_mot(dir / "det.txt", dir / "det.emb");
    ASSERT_EQ(set.size(), 2u);
    EXPECT_EQ(set.detections()[0].frame, 0);
    EXPECT_EQ(set.detections()[0].embedding, (Embedding{0, 1}));
    EXPECT_EQ(set.detections()[1].embedding, (Embedding{1, 0}));
}

TEST(Embeddings, RoundTripIsBitExactForFloat32Values) {
    TempDir dir("emb");
    std::vector<Detection> rows;
    for (int i = 0; i < 5; ++i) {
        rows.push_back(det(i, 0, 0, 1, 1, {static_cast<float>(0.1 * i), -1.5f, static_cast<float>(1.0 / (i + 3))}));
    }
    write_embeddings(rows, dir / "x.emb");
    const EmbeddingTable table = read_embeddings(dir / "x.emb");
    EXPECT_EQ(table.rows, 5u);
    EXPECT_EQ(table.dim, 3u);
    for (std::size_t r = 0; r < 5; ++r) {
        for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(table.values[r * 3 + k], static_cast<float>(rows[r].embedding[k]));
    }
    EXPECT_EQ(std::filesystem::file_size(dir / "x.emb"), 16u + 5u * 3u * 4u);
}

TEST(WriteMot, OneRowPerDetectionAndEmptyFileForNoTracks) {
    TempDir dir("write");
    const std::vector<Tracklet> tracks{Tracklet(4, {det(0, 1, 2, 3, 4), det(1, 1, 2, 3, 4)})};
    write_mot(tracks, dir / "a.txt");
    const std::string text = testing::slurp(dir / "a.txt");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
    EXPECT_EQ(text.substr(0, 10), "1,4,1,2,3,");
    write_mot(std::vector<Tracklet>{}, dir / "b.txt");
    EXPECT_EQ(testing::slurp(dir / "b.txt"), "");
}

TEST(WriteMot, ParseOfWriteReproducesRandomScenario) {
    TempDir dir("write");
    ScenarioSpec spec;
    spec.n_objects = 6;
    spec.n_frames = 40;
    spec.seed = 21;
    const Scenario scenario = simulate(spec);
    write_mot(scenario.ground_truth, dir / "gt.txt");
    const auto tracks = tracks_from_ids(parse_mot(dir / "gt.txt"));
    ASSERT_EQ(tracks.size(), scenario.ground_truth.size());
    std::map<int, const Tracklet*> by_id;
    for (const auto& t : tracks) by_id[t.id()] = &t;
    for (const auto& original : scenario.ground_truth) {
        const Tracklet& parsed = *by_id.at(original.id());
        ASSERT_EQ(parsed.size(), original.size());
        for (std::size_t i = 0; i < parsed.size(); ++i) {
            const auto& a = parsed.detections()[i];
            const auto& b = original.detections()[i];
            EXPECT_EQ(a.frame, b.frame);
            EXPECT_EQ(a.confidence, b.confidence);
            EXPECT_NEAR(a.box.x, b.box.x, 1e-4);
            EXPECT_NEAR(a.box.y, b.box.y, 1e-4);
            EXPECT_NEAR(a.box.w, b.box.w, 1e-4);
            EXPECT_NEAR(a.box.h, b.box.h, 1e-4);
        }
    }
}

TEST(DetectionSet, CanonicalOrderIgnoresInputOrder) {
    std::vector<Detection> rows{det(1, 5, 5, 2, 2), det(0, 9, 0, 2, 2), det(1, 1, 5, 2, 2), det(0, 1, 0, 2, 2)};
    std::vector<Detection> shuffled{rows[2], rows[0], rows[3], rows[1]};
    const DetectionSet a = DetectionSet::from(rows, 2);
    const DetectionSet b = DetectionSet::from(shuffled, 2);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(a.detections()[i].box, b.detections()[i].box);
        EXPECT_EQ(a.detections()[i].index, static_cast<std::int64_t>(i));
    }
    EXPECT_EQ(a.frame(1).size(), 2u);
    EXPECT_EQ(a.frame(1)[0].box.x, 1.0);
}

TEST(DetectionSet, SliceKeepsSourceIndices) {
    std::vector<Detection> rows;
    for (int f = 0; f < 6; ++f) rows.push_back(det(f, 0, 0, 1, 1));
    const DetectionSet set = DetectionSet::from(rows, 6);
    const DetectionSet mid = set.slice(2, 5);
    EXPECT_EQ(mid.first_frame(), 2);
    EXPECT_EQ(mid.n_frames(), 3);
    ASSERT_EQ(mid.size(), 3u);
    EXPECT_EQ(mid.detections()[0].index, 2);
    EXPECT_EQ(mid.frame(4).size(), 1u);
    EXPECT_EQ(mid.frame(5).size(), 0u);
}

TEST(DetectionSet, RejectsOutOfRangeAndBadConfidence) {
    EXPECT_THROW(DetectionSet::from({det(3, 0, 0, 1, 1)}, 3), ValidationError);
    Detection d = det(0, 0, 0, 1, 1);
    d.confidence = 1.5;
    EXPECT_THROW(DetectionSet::from({d}, 1), ValidationError);
    EXPECT_THROW(DetectionSet::from({det(0, 0, 0, 1, 1, {1}), det(0, 5, 5, 1, 1, {1, 2})}, 1), LengthError);
}

TEST(Synthesize, OneObjectFiveFrames) {
    ScenarioSpec spec;
    spec.n_objects = 1;
    spec.n_frames = 5;
    const DetectionSet set = synthesize(spec);
    EXPECT_EQ(set.size(), 5u);
    std::set<int> ids;
    for (const auto& d : set.detections()) ids.insert(*d.gt_id);
    EXPECT_EQ(ids.size(), 1u);
}

TEST(Synthesize, ZeroNoiseGivesIdenticalIdentityEmbeddings) {
    ScenarioSpec spec;
    spec.n_objects = 4;
    spec.n_frames = 20;
    spec.seed = 3;
    const DetectionSet set = synthesize(spec);
    std::map<int, Embedding> first;
    for (const auto& d : set.detections()) {
        const auto [it, inserted] = first.emplace(*d.gt_id, d.embedding);
        if (!inserted) {
            EXPECT_EQ(it->second, d.embedding);
        }
    }
    EXPECT_EQ(first.size(), 4u);
}

TEST(Synthesize, DeterministicUnderSeed) {
    ScenarioSpec spec;
    spec.seed = 7;
    spec.miss_rate = 0.1;
    spec.embedding_noise_sigma = 0.1;
    spec.occlusions = random_occlusions(spec.n_objects, spec.n_frames, 2, 10, 7);
    const DetectionSet a = synthesize(spec);
    const DetectionSet b = synthesize(spec);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a.detections()[i].box, b.detections()[i].box);
        EXPECT_EQ(a.detections()[i].embedding, b.detections()[i].embedding);
        EXPECT_EQ(a.detections()[i].gt_id, b.detections()[i].gt_id);
    }
}

TEST(Synthesize, CompleteTrajectoriesWithoutMissesOrOcclusions) {
    ScenarioSpec spec;
    spec.n_objects = 5;
    spec.n_frames = 30;
    spec.seed = 9;
    const Scenario scenario = simulate(spec);
    EXPECT_EQ(scenario.detections.size(), 150u);
    for (const auto& t : scenario.ground_truth) {
        EXPECT_EQ(t.size(), 30u);
        EXPECT_EQ(t.start_frame(), 0);
    }
}

TEST(Synthesize, OcclusionsRemoveExactlyTheirFrames) {
    ScenarioSpec spec;
    spec.n_objects = 2;
    spec.n_frames = 30;
    spec.occlusions = {{{5, 4}}, {{10, 3}, {20, 2}}};
    const Scenario scenario = simulate(spec);
    EXPECT_EQ(scenario.detections.size(), 60u - 4u - 3u - 2u);
    EXPECT_EQ(scenario.ground_truth[0].size(), 30u);
}

TEST(Synthesize, NoiseIsRenormalized) {
    ScenarioSpec spec;
    spec.embedding_noise_sigma = 0.3;
    spec.n_frames = 10;
    const DetectionSet set = synthesize(spec);
    for (const auto& d : set.detections()) {
        double norm = 0.0;
        for (double v : d.embedding) norm += v * v;
        EXPECT_NEAR(norm, 1.0, 1e-12);
    }
}

TEST(Synthesize, InvalidSpecsAreRejected) {
    ScenarioSpec spec;
    spec.n_frames = 1;
    EXPECT_THROW(validate(spec), ValidationError);
    spec = {};
    spec.miss_rate = 1.5;
    EXPECT_THROW(validate(spec), ValidationError);
    spec = {};
    spec.n_objects = 0;
    EXPECT_THROW(validate(spec), ValidationError);
}

TEST(AttachGroundTruth, LabelsByBestIou) {
    const std::vector<Tracklet> gt{Tracklet(1, {det(0, 0, 0, 10, 10), det(1, 1, 0, 10, 10)}),
                                   Tracklet(2, {det(0, 50, 50, 10, 10)})};
    const DetectionSet dets =
        DetectionSet::from({det(0, 1, 1, 10, 10), det(0, 51, 50, 10, 10), det(1, 200, 200, 5, 5)}, 2);
    const DetectionSet labeled = attach_ground_truth(dets, gt);
    EXPECT_EQ(labeled.detections()[0].gt_id, 1);
    EXPECT_EQ(labeled.detections()[1].gt_id, 2);
    EXPECT_FALSE(labeled.detections()[2].gt_id.has_value());
    EXPECT_FALSE(labeled.has_gt());
}

TEST(PseudoEmbedding, DeterministicUnitVectors) {
    const BoundingBox box{1, 2, 3, 4};
    const Embedding a = pseudo_embedding(5, box, 8);
    EXPECT_EQ(a, pseudo_embedding(5, box, 8));
    EXPECT_NE(a, pseudo_embedding(6, box, 8));
    double norm = 0.0;
    for (double v : a) norm += v * v;
    EXPECT_NEAR(norm, 1.0, 1e-12);
}

}  // namespace
}  // namespace conolink
