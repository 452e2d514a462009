#include "conolink/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <type_traits>

#include "conolink/error.hpp"

namespace conolink {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end) throw ValidationError("config key '" + key + "': bad value '" + text + "'");
    return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "1" || text == "true") return true;
    if (text == "0" || text == "false") return false;
    throw ValidationError("config key '" + key + "': expected true or false");
}

std::string fmt_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

struct Key {
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Field>
Key number_key(Field field) {
    return {[field](RunConfig& c, const std::string& k, const std::string& v) { field(c) = parse_number<T>(k, v); },
            [field](const RunConfig& c) {
                RunConfig copy = c;
                if constexpr (std::is_floating_point_v<T>) {
                    return fmt_double(field(copy));
                } else {
                    return std::to_string(field(copy));
                }
            }};
}

const std::map<std::string, Key>& registry() {
    static const std::map<std::string, Key> keys = [] {
        std::map<std::string, Key> k;
        k["window"] = number_key<int>([](RunConfig& c) -> int& { return c.tracker.window.window; });
        k["step"] = number_key<int>([](RunConfig& c) -> int& { return c.tracker.window.step; });
        k["clip_len"] = {[](RunConfig& c, const std::string& key, const std::string& v) {
                             const int len = parse_number<int>(key, v);
                             c.tracker.clip.clip_len = len;
                             c.tracker.window.clip_len = len;
                         },
                         [](const RunConfig& c) { return std::to_string(c.tracker.clip.clip_len); }};
        k["overlap"] = number_key<int>([](RunConfig& c) -> int& { return c.tracker.clip.overlap; });
        k["top_k"] = number_key<int>([](RunConfig& c) -> int& { return c.tracker.builder.top_k; });
        k["new_track_threshold"] =
            number_key<double>([](RunConfig& c) -> double& { return c.tracker.builder.new_track_threshold; });
        k["lookback"] = number_key<int>([](RunConfig& c) -> int& { return c.tracker.builder.lookback; });
        k["epsilon"] = number_key<double>([](RunConfig& c) -> double& { return c.tracker.aggregate.epsilon; });
        k["traj_passes"] = number_key<int>([](RunConfig& c) -> int& { return c.tracker.aggregate.traj_passes; });
        k["first_pass"] = {[](RunConfig& c, const std::string& key, const std::string& v) {
                               if (v == "rounding") {
                                   c.tracker.aggregate.first_pass = FirstPassMode::Rounding;
                               } else if (v == "tracker") {
                                   c.tracker.aggregate.first_pass = FirstPassMode::Tracker;
                               } else {
                                   throw ValidationError("config key '" + key + "': expected rounding or tracker");
                               }
                           },
                           [](const RunConfig& c) {
                               return std::string(c.tracker.aggregate.first_pass == FirstPassMode::Rounding
                                                      ? "rounding"
                                                      : "tracker");
                           }};
        k["interpolate"] = {[](RunConfig& c, const std::string& key,
                               const std::string& v) { c.tracker.interpolate = parse_bool(key, v); },
                            [](const RunConfig& c) { return std::string(c.tracker.interpolate ? "true" : "false"); }};
        k["threads"] = number_key<unsigned>([](RunConfig& c) -> unsigned& { return c.tracker.threads; });
        k["embed_dim"] = number_key<std::size_t>([](RunConfig& c) -> std::size_t& { return c.mpn.embed_dim; });
        k["node_dim"] = number_key<std::size_t>([](RunConfig& c) -> std::size_t& { return c.mpn.node_dim; });
        k["edge_dim"] = number_key<std::size_t>([](RunConfig& c) -> std::size_t& { return c.mpn.edge_dim; });
        k["hidden"] = number_key<std::size_t>([](RunConfig& c) -> std::size_t& { return c.mpn.hidden; });
        k["steps"] = number_key<std::size_t>([](RunConfig& c) -> std::size_t& { return c.mpn.steps; });
        k["time_scale"] = number_key<double>([](RunConfig& c) -> double& { return c.mpn.time_scale; });
        k["iterations"] =
            number_key<std::size_t>([](RunConfig& c) -> std::size_t& { return c.schedule.iterations; });
        k["learning_rate"] = number_key<double>([](RunConfig& c) -> double& { return c.schedule.learning_rate; });
        k["weight_decay"] = number_key<double>([](RunConfig& c) -> double& { return c.schedule.weight_decay; });
        k["optimizer"] = {[](RunConfig& c, const std::string& key, const std::string& v) {
                              if (v == "adam") {
                                  c.schedule.optimizer = Optimizer::Adam;
                              } else if (v == "gd") {
                                  c.schedule.optimizer = Optimizer::GradientDescent;
                              } else {
                                  throw ValidationError("config key '" + key + "': expected adam or gd");
                              }
                          },
                          [](const RunConfig& c) {
                              return std::string(c.schedule.optimizer == Optimizer::Adam ? "adam" : "gd");
                          }};
        k["batch"] = number_key<std::size_t>([](RunConfig& c) -> std::size_t& { return c.schedule.batch; });
        k["second_pass_after"] =
            number_key<std::size_t>([](RunConfig& c) -> std::size_t& { return c.schedule.second_pass_after; });
        k["gamma"] = number_key<double>([](RunConfig& c) -> double& { return c.schedule.gamma; });
        k["train_clip_frames"] = number_key<int>([](RunConfig& c) -> int& { return c.samples.clip_frames; });
        k["fragment_rate"] = number_key<double>([](RunConfig& c) -> double& { return c.samples.fragment_rate; });
        k["seed"] = {[](RunConfig& c, const std::string& key, const std::string& v) {
                         c.seed = parse_number<std::uint64_t>(key, v);
                         c.schedule.seed = c.seed;
                         c.samples.seed = c.seed;
                     },
                     [](const RunConfig& c) { return std::to_string(c.seed); }};
        return k;
    }();
    return keys;
}

}  // namespace

void validate(const RunConfig& cfg) {
    validate(cfg.tracker);
    validate(cfg.mpn);
    validate(cfg.schedule);
    validate(cfg.samples);
}

ConfigValues parse_config_text(std::string_view text) {
    ConfigValues out;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(line_no, "expected key=value");
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty() || value.empty()) throw ParseError(line_no, "empty key or value");
        out[key] = value;
    }
    return out;
}

ConfigValues read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

void apply(RunConfig& cfg, const ConfigValues& values) {
    const auto& keys = registry();
    for (const auto& [key, value] : values) {
        const auto it = keys.find(key);
        if (it == keys.end()) throw ValidationError("unknown config key '" + key + "'");
        it->second.set(cfg, key, value);
    }
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& [key, _] : registry()) out.push_back(key);
    return out;
}

std::string to_text(const RunConfig& cfg) {
    std::string out;
    for (const auto& [key, k] : registry()) out += key + " = " + k.get(cfg) + "\n";
    return out;
}

}  // namespace conolink
