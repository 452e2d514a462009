#include <gtest/gtest.h>

#include "conolink/config.hpp"
#include "conolink/error.hpp"
#include "test_support.hpp"

namespace conolink {
namespace {

TEST(ParseConfigText, CommentsBlanksAndWhitespace) {
    const ConfigValues v = parse_config_text("# header\n\n  top_k = 3  \nepsilon=0.6 # trailing\n\tseed\t=\t7\n");
    EXPECT_EQ(v.size(), 3u);
    EXPECT_EQ(v.at("top_k"), "3");
    EXPECT_EQ(v.at("epsilon"), "0.6");
    EXPECT_EQ(v.at("seed"), "7");
}

TEST(ParseConfigText, ReportsTheOffendingLine) {
    try {
        parse_config_text("top_k=3\n\nno equals sign here\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    EXPECT_THROW(parse_config_text("=5\n"), ParseError);
}

TEST(ReadConfigFile, MissingFileIsAnIoError) {
    testing::TempDir dir("cfg");
    EXPECT_THROW(read_config_file(dir / "absent.cfg"), IoError);
    testing::write_text(dir / "a.cfg", "lookback=8\n");
    EXPECT_EQ(read_config_file(dir / "a.cfg").at("lookback"), "8");
}

TEST(Apply, SetsTypedFields) {
    RunConfig cfg;
    conolink::apply(cfg, {{"top_k", "3"}, {"clip_len", "128"}, {"overlap", "32"}, {"optimizer", "gd"},
                          {"first_pass", "tracker"}, {"interpolate", "false"}, {"seed", "42"}, {"hidden", "8"}});
    EXPECT_EQ(cfg.tracker.builder.top_k, 3);
    EXPECT_EQ(cfg.tracker.clip.clip_len, 128);
    EXPECT_EQ(cfg.tracker.window.clip_len, 128);
    EXPECT_EQ(cfg.tracker.clip.overlap, 32);
    EXPECT_EQ(cfg.schedule.optimizer, Optimizer::GradientDescent);
    EXPECT_EQ(cfg.tracker.aggregate.first_pass, FirstPassMode::Tracker);
    EXPECT_FALSE(cfg.tracker.interpolate);
    EXPECT_EQ(cfg.seed, 42u);
    EXPECT_EQ(cfg.schedule.seed, 42u);
    EXPECT_EQ(cfg.samples.seed, 42u);
    EXPECT_EQ(cfg.mpn.hidden, 8u);
    EXPECT_NO_THROW(validate(cfg));
}

TEST(Apply, RejectsUnknownKeysAndBadValues) {
    RunConfig cfg;
    EXPECT_THROW(conolink::apply(cfg, {{"topk", "3"}}), ValidationError);
    EXPECT_THROW(conolink::apply(cfg, {{"top_k", "three"}}), ValidationError);
    EXPECT_THROW(conolink::apply(cfg, {{"top_k", "3x"}}), ValidationError);
    EXPECT_THROW(conolink::apply(cfg, {{"optimizer", "sgd"}}), ValidationError);
    EXPECT_THROW(conolink::apply(cfg, {{"interpolate", "maybe"}}), ValidationError);
    RunConfig bad;
    conolink::apply(bad, {{"epsilon", "1.5"}});
    EXPECT_THROW(validate(bad), ValidationError);
}

TEST(ToText, RoundTripsEveryKey) {
    RunConfig cfg;
    conolink::apply(cfg, {{"top_k", "2"}, {"learning_rate", "0.001"}, {"time_scale", "0.03125"},
                          {"fragment_rate", "0.2"}, {"seed", "9"}, {"traj_passes", "2"}});
    const std::string text = to_text(cfg);
    RunConfig restored;
    conolink::apply(restored, parse_config_text(text));
    EXPECT_EQ(to_text(restored), text);
    EXPECT_EQ(parse_config_text(text).size(), config_keys().size());
}

TEST(ConfigKeys, SortedAndUnique) {
    const auto keys = config_keys();
    EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
    EXPECT_EQ(std::adjacent_find(keys.begin(), keys.end()), keys.end());
}

}  // namespace
}  // namespace conolink
