#include "conolink/ingest.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

#include "conolink/assignment.hpp"
#include "conolink/error.hpp"
#include "conolink/geometry.hpp"

namespace conolink {

namespace {

bool canonical_less(const Detection& a, const Detection& b) {
    if (a.frame != b.frame) return a.frame < b.frame;
    if (a.box.x != b.box.x) return a.box.x < b.box.x;
    if (a.box.y != b.box.y) return a.box.y < b.box.y;
    if (a.box.w != b.box.w) return a.box.w < b.box.w;
    if (a.box.h != b.box.h) return a.box.h < b.box.h;
    return a.confidence < b.confidence;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

Embedding random_unit_vector(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Embedding out(dim);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (auto& value : out) {
            value = normal(rng);
            norm += value * value;
        }
    } while (norm <= 1e-24);
    norm = std::sqrt(norm);
    for (auto& value : out) value /= norm;
    return out;
}

void append_number(std::string& out, double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    out.append(buf, res.ptr);
}

void append_row(std::string& out, int frame, int id, const BoundingBox& box, double conf) {
    out += std::to_string(frame + 1);
    out += ',';
    out += std::to_string(id);
    for (double value : {box.x, box.y, box.w, box.h, conf}) {
        out += ',';
        append_number(out, value);
    }
    out += ",-1,-1,-1\n";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot open " + path.string() + " for writing");
    file.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!file) throw IoError("write failed for " + path.string());
}

template <typename T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if (!in) throw LengthError("embedding sidecar truncated");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

double parse_field(std::string_view field, std::size_t line) {
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
        field.remove_suffix(1);
    }
    double value = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
        throw ParseError(line, "malformed number '" + std::string(field) + "'");
    }
    return value;
}

}  // namespace

// ---------------------------------------------------------------------------

DetectionSet DetectionSet::from(std::vector<Detection> detections, int n_frames) {
    if (n_frames < 0) throw ValidationError("n_frames must be non-negative");
    std::stable_sort(detections.begin(), detections.end(), canonical_less);
    const std::size_t dim = detections.empty() ? 0 : detections.front().embedding.size();
    for (std::size_t i = 0; i < detections.size(); ++i) {
        auto& det = detections[i];
        validate(det.box);
        if (det.frame < 0 || det.frame >= n_frames) throw ValidationError("detection frame out of range");
        if (!(det.confidence >= 0.0 && det.confidence <= 1.0)) {
            throw ValidationError("confidence outside [0, 1]");
        }
        if (det.embedding.size() != dim) throw LengthError("inconsistent embedding dimensions");
        for (double value : det.embedding) {
            if (!std::isfinite(value)) throw ValidationError("non-finite embedding entry");
        }
        det.index = static_cast<std::int64_t>(i);
    }
    DetectionSet set;
    set.detections_ = std::move(detections);
    set.n_frames_ = n_frames;
    set.first_frame_ = 0;
    set.rebuild_index();
    return set;
}

DetectionSet DetectionSet::slice(int first, int last) const {
    first = std::max(first, first_frame_);
    last = std::min(last, end_frame());
    DetectionSet out;
    out.first_frame_ = first;
    out.n_frames_ = std::max(0, last - first);
    if (out.n_frames_ > 0) {
        const auto begin = frame_range(first).first;
        const auto end = frame_range(last - 1).second;
        out.detections_.assign(detections_.begin() + static_cast<std::ptrdiff_t>(begin),
                               detections_.begin() + static_cast<std::ptrdiff_t>(end));
    }
    out.rebuild_index();
    return out;
}

void DetectionSet::rebuild_index() {
    frame_offsets_.assign(static_cast<std::size_t>(n_frames_) + 1, 0);
    for (const auto& det : detections_) ++frame_offsets_[static_cast<std::size_t>(det.frame - first_frame_) + 1];
    for (std::size_t f = 1; f < frame_offsets_.size(); ++f) frame_offsets_[f] += frame_offsets_[f - 1];
    has_gt_ = !detections_.empty() &&
              std::all_of(detections_.begin(), detections_.end(), [](const Detection& d) { return d.gt_id.has_value(); });
}

std::pair<std::size_t, std::size_t> DetectionSet::frame_range(int frame) const {
    if (frame < first_frame_ || frame >= end_frame()) return {0, 0};
    const auto f = static_cast<std::size_t>(frame - first_frame_);
    return {frame_offsets_[f], frame_offsets_[f + 1]};
}

std::span<const Detection> DetectionSet::frame(int frame) const {
    const auto [begin, end] = frame_range(frame);
    return std::span<const Detection>(detections_).subspan(begin, end - begin);
}

// ---------------------------------------------------------------------------

Embedding pseudo_embedding(int frame, const BoundingBox& box, std::size_t dim) {
    std::uint64_t h = splitmix64(static_cast<std::uint64_t>(static_cast<std::int64_t>(frame)));
    for (double value : {box.x, box.y, box.w, box.h}) {
        h = splitmix64(h ^ std::bit_cast<std::uint64_t>(value));
    }
    std::mt19937_64 rng(h);
    return random_unit_vector(rng, dim);
}

EmbeddingTable read_embeddings(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot open embedding file " + path.string());
    EmbeddingTable table;
    table.rows = read_le<std::uint64_t>(file);
    table.dim = read_le<std::uint64_t>(file);
    if (table.dim == 0 && table.rows > 0) throw ValidationError("embedding dimension is zero");
    table.values.resize(table.rows * table.dim);
    for (auto& value : table.values) value = read_le<float>(file);
    if (file.peek() != std::char_traits<char>::eof()) throw LengthError("embedding sidecar has trailing bytes");
    return table;
}

void write_embeddings(std::span<const Detection> detections, const std::filesystem::path& path) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot open " + path.string() + " for writing");
    const std::uint64_t dim = detections.empty() ? 0 : detections.front().embedding.size();
    write_le<std::uint64_t>(file, detections.size());
    write_le<std::uint64_t>(file, dim);
    for (const auto& det : detections) {
        if (det.embedding.size() != dim) throw LengthError("inconsistent embedding dimensions");
        for (double value : det.embedding) write_le<float>(file, static_cast<float>(value));
    }
    if (!file) throw IoError("write failed for " + path.string());
}

DetectionSet parse_mot(const std::filesystem::path& det_path,
                       const std::optional<std::filesystem::path>& embed_path, std::size_t pseudo_dim) {
    std::ifstream file(det_path);
    if (!file) throw IoError("cannot open detection file " + det_path.string());

    std::vector<Detection> rows;
    std::string text;
    std::size_t line_no = 0;
    int max_frame = -1;
    while (std::getline(file, text)) {
        ++line_no;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<double> fields;
        std::string_view rest(text);
        while (true) {
            const auto comma = rest.find(',');
            fields.push_back(parse_field(rest.substr(0, comma), line_no));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (fields.size() < 7) throw ParseError(line_no, "expected at least 7 comma-separated fields");
        const double frame = fields[0];
        if (frame < 1 || frame != std::floor(frame)) throw ParseError(line_no, "frame must be a positive integer");
        if (fields[1] != std::floor(fields[1])) throw ParseError(line_no, "id must be an integer");
        Detection det;
        det.frame = static_cast<int>(frame) - 1;
        if (fields[1] >= 0) det.gt_id = static_cast<int>(fields[1]);
        det.box = {fields[2], fields[3], fields[4], fields[5]};
        det.confidence = fields[6];
        try {
            validate(det.box);
        } catch (const ValidationError& e) {
            throw ParseError(line_no, e.what());
        }
        if (!(det.confidence >= 0.0 && det.confidence <= 1.0)) {
            throw ParseError(line_no, "confidence outside [0, 1]");
        }
        max_frame = std::max(max_frame, det.frame);
        rows.push_back(std::move(det));
    }

    if (embed_path) {
        const EmbeddingTable table = read_embeddings(*embed_path);
        if (table.rows != rows.size()) {
            throw LengthError("embedding rows (" + std::to_string(table.rows) + ") do not match detections (" +
                              std::to_string(rows.size()) + ")");
        }
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const float* src = table.values.data() + r * table.dim;
            rows[r].embedding.assign(src, src + table.dim);
        }
    } else {
        for (auto& det : rows) det.embedding = pseudo_embedding(det.frame, det.box, pseudo_dim);
    }
    return DetectionSet::from(std::move(rows), max_frame + 1);
}

void write_mot(std::span<const Tracklet> tracks, const std::filesystem::path& path) {
    struct Row {
        int frame;
        int id;
        const Detection* det;
    };
    std::vector<Row> rows;
    for (const auto& track : tracks) {
        for (const auto& det : track.detections()) rows.push_back({det.frame, track.id(), &det});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return a.frame != b.frame ? a.frame < b.frame : a.id < b.id;
    });
    std::string out;
    for (const auto& row : rows) append_row(out, row.frame, row.id, row.det->box, row.det->confidence);
    write_text(path, out);
}

void write_detections(const DetectionSet& dets, const std::filesystem::path& path, bool with_ids) {
    std::string out;
    for (const auto& det : dets.detections()) {
        const int id = with_ids && det.gt_id ? *det.gt_id : -1;
        append_row(out, det.frame, id, det.box, det.confidence);
    }
    write_text(path, out);
}

// ---------------------------------------------------------------------------

void validate(const ScenarioSpec& spec) {
    if (spec.n_objects < 1) throw ValidationError("scenario needs at least one object");
    if (spec.n_frames < 2) throw ValidationError("scenario needs at least two frames");
    if (!(spec.arena_width > 0 && spec.arena_height > 0)) throw ValidationError("arena must have positive size");
    if (!(spec.min_speed >= 0 && spec.max_speed >= spec.min_speed)) throw ValidationError("invalid speed range");
    auto is_prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!is_prob(spec.direction_change_prob)) throw ValidationError("direction_change_prob outside [0, 1]");
    if (!is_prob(spec.miss_rate)) throw ValidationError("miss_rate outside [0, 1]");
    if (!(spec.embedding_noise_sigma >= 0.0) || !std::isfinite(spec.embedding_noise_sigma)) {
        throw ValidationError("embedding_noise_sigma must be finite and non-negative");
    }
    if (spec.embedding_dim == 0) throw ValidationError("embedding_dim must be positive");
    if (spec.occlusions.size() > static_cast<std::size_t>(spec.n_objects)) {
        throw ValidationError("more occlusion lists than objects");
    }
    for (const auto& list : spec.occlusions) {
        for (const auto& occ : list) {
            if (occ.duration < 0 || occ.duration >= spec.n_frames) {
                throw ValidationError("occlusion duration must lie in [0, n_frames)");
            }
            if (occ.start < 0 || occ.start >= spec.n_frames) throw ValidationError("occlusion start out of range");
        }
    }
}

Scenario simulate(const ScenarioSpec& spec) {
    validate(spec);
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);

    struct ObjectState {
        Embedding anchor;
        BoundingBox box;
        double vx = 0.0;
        double vy = 0.0;
    };
    std::vector<ObjectState> objects(static_cast<std::size_t>(spec.n_objects));
    const double two_pi = 2.0 * std::numbers::pi;
    for (auto& obj : objects) {
        obj.anchor = random_unit_vector(rng, spec.embedding_dim);
        const double w = 20.0 + 30.0 * unit(rng);
        const double h = w * (1.5 + 1.5 * unit(rng));
        const double x = unit(rng) * std::max(1.0, spec.arena_width - w);
        const double y = unit(rng) * std::max(1.0, spec.arena_height - h);
        obj.box = {x, y, w, h};
        const double angle = two_pi * unit(rng);
        const double speed = spec.min_speed + (spec.max_speed - spec.min_speed) * unit(rng);
        obj.vx = speed * std::cos(angle);
        obj.vy = speed * std::sin(angle);
    }

    auto occluded = [&](std::size_t obj, int frame) {
        if (obj >= spec.occlusions.size()) return false;
        return std::any_of(spec.occlusions[obj].begin(), spec.occlusions[obj].end(), [frame](const Occlusion& o) {
            return frame >= o.start && frame < o.start + o.duration;
        });
    };

    std::vector<std::vector<Detection>> gt_tracks(objects.size());
    std::vector<Detection> detections;
    for (int frame = 0; frame < spec.n_frames; ++frame) {
        for (std::size_t k = 0; k < objects.size(); ++k) {
            auto& obj = objects[k];
            Detection truth;
            truth.frame = frame;
            truth.box = obj.box;
            truth.confidence = 1.0;
            truth.embedding = obj.anchor;
            truth.gt_id = static_cast<int>(k) + 1;
            gt_tracks[k].push_back(truth);

            // Every draw happens regardless of outcome so the random stream layout
            // does not depend on earlier decisions.
            const double miss_draw = unit(rng);
            const double confidence = 0.6 + 0.4 * unit(rng);
            Embedding embedding = obj.anchor;
            for (auto& value : embedding) value += spec.embedding_noise_sigma * noise(rng);
            if (occluded(k, frame) || miss_draw < spec.miss_rate) continue;
            double norm = 0.0;
            for (double value : embedding) norm += value * value;
            norm = std::sqrt(norm);
            if (norm > 0.0) {
                for (auto& value : embedding) value /= norm;
            } else {
                embedding = obj.anchor;
            }
            Detection det = truth;
            det.confidence = confidence;
            det.embedding = std::move(embedding);
            detections.push_back(std::move(det));
        }
        for (auto& obj : objects) {
            const double turn_draw = unit(rng);
            const double angle = two_pi * unit(rng);
            if (turn_draw < spec.direction_change_prob) {
                const double speed = std::hypot(obj.vx, obj.vy);
                obj.vx = speed * std::cos(angle);
                obj.vy = speed * std::sin(angle);
            }
            obj.box.x += obj.vx;
            obj.box.y += obj.vy;
            const double max_x = std::max(0.0, spec.arena_width - obj.box.w);
            const double max_y = std::max(0.0, spec.arena_height - obj.box.h);
            if (obj.box.x < 0.0 || obj.box.x > max_x) {
                obj.vx = -obj.vx;
                obj.box.x = std::clamp(obj.box.x, 0.0, max_x);
            }
            if (obj.box.y < 0.0 || obj.box.y > max_y) {
                obj.vy = -obj.vy;
                obj.box.y = std::clamp(obj.box.y, 0.0, max_y);
            }
        }
    }

    Scenario scenario;
    scenario.detections = DetectionSet::from(std::move(detections), spec.n_frames);
    for (std::size_t k = 0; k < gt_tracks.size(); ++k) {
        scenario.ground_truth.emplace_back(static_cast<int>(k) + 1, std::move(gt_tracks[k]));
    }
    return scenario;
}

DetectionSet synthesize(const ScenarioSpec& spec) { return simulate(spec).detections; }

std::vector<std::vector<Occlusion>> random_occlusions(int n_objects, int n_frames, int per_object,
                                                      int max_duration, std::uint64_t seed) {
    if (n_objects < 0 || n_frames < 2 || per_object < 0 || max_duration < 1) {
        throw ValidationError("invalid occlusion parameters");
    }
    std::mt19937_64 rng(splitmix64(seed ^ 0x0CC1U));
    std::uniform_int_distribution<int> length(1, std::min(max_duration, n_frames - 1));
    std::uniform_int_distribution<int> start(1, std::max(1, n_frames - 2));
    std::vector<std::vector<Occlusion>> out(static_cast<std::size_t>(n_objects));
    for (auto& list : out) {
        for (int i = 0; i < per_object; ++i) list.push_back({start(rng), length(rng)});
    }
    return out;
}

DetectionSet attach_ground_truth(const DetectionSet& dets, std::span<const Tracklet> ground_truth, double iou_gate) {
    std::map<int, std::vector<std::pair<int, const BoundingBox*>>> gt_by_frame;
    for (const auto& track : ground_truth) {
        for (const auto& det : track.detections()) gt_by_frame[det.frame].emplace_back(track.id(), &det.box);
    }
    std::vector<Detection> out = dets.detections();
    for (auto& det : out) det.gt_id.reset();
    std::size_t begin = 0;
    while (begin < out.size()) {
        std::size_t end = begin;
        while (end < out.size() && out[end].frame == out[begin].frame) ++end;
        const auto it = gt_by_frame.find(out[begin].frame);
        if (it != gt_by_frame.end()) {
            const auto& gts = it->second;
            Eigen::MatrixXd cost(static_cast<Eigen::Index>(end - begin), static_cast<Eigen::Index>(gts.size()));
            for (std::size_t i = begin; i < end; ++i) {
                for (std::size_t j = 0; j < gts.size(); ++j) {
                    const double overlap = iou(out[i].box, *gts[j].second);
                    cost(static_cast<Eigen::Index>(i - begin), static_cast<Eigen::Index>(j)) =
                        overlap >= iou_gate ? 1.0 - overlap : kForbidden;
                }
            }
            const auto assignment = solve_assignment(cost);
            for (std::size_t i = begin; i < end; ++i) {
                const int j = assignment[i - begin];
                if (j >= 0) out[i].gt_id = gts[static_cast<std::size_t>(j)].first;
            }
        }
        begin = end;
    }
    DetectionSet result = DetectionSet::from(std::move(out), dets.end_frame());
    return result;
}

std::vector<Tracklet> tracks_from_ids(const DetectionSet& dets) {
    std::map<int, std::vector<Detection>> by_id;
    for (const auto& det : dets.detections()) {
        if (!det.gt_id) throw ValidationError("detection without id cannot be grouped into a track");
        by_id[*det.gt_id].push_back(det);
    }
    std::vector<Tracklet> tracks;
    for (auto& [id, members] : by_id) {
        for (std::size_t i = 1; i < members.size(); ++i) {
            if (members[i].frame == members[i - 1].frame) {
                throw ValidationError("id " + std::to_string(id) + " has two boxes in frame " +
                                      std::to_string(members[i].frame + 1));
            }
        }
        tracks.emplace_back(id, std::move(members));
    }
    return tracks;
}

}  // namespace conolink
