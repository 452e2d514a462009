#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "conolink/mpn.hpp"
#include "conolink/pipeline.hpp"
#include "conolink/train.hpp"

namespace conolink {

/// Every tunable of a run. Values come from defaults, then a key=value file, then
/// command-line overrides.
struct RunConfig {
    TrackerConfig tracker;
    MpnConfig mpn;
    TrainSchedule schedule;
    SampleConfig samples;
    std::uint64_t seed = 0;
};

void validate(const RunConfig& cfg);

using ConfigValues = std::map<std::string, std::string>;

/// One `key = value` per line; `#` starts a comment; blank lines are ignored.
/// Throws ParseError with the 1-based line number.
ConfigValues parse_config_text(std::string_view text);
ConfigValues read_config_file(const std::filesystem::path& path);

/// Applies values in key order. Unknown keys and malformed values throw ValidationError.
/// `seed` also seeds the schedule and sample generator.
void apply(RunConfig& cfg, const ConfigValues& values);

/// Recognized keys, sorted.
std::vector<std::string> config_keys();

/// Serializes every key of `cfg` so that apply(RunConfig{}, parse(text)) restores it.
std::string to_text(const RunConfig& cfg);

}  // namespace conolink
