#pragma once

// Scripted platform scenes: ground-truth generation by waypoint
// interpolation, and the inverse of decode_head that turns ground truth into
// synthetic head tensors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "platguard/errors.hpp"
#include "platguard/station_geometry.hpp"
#include "platguard/tensor_io.hpp"
#include "platguard/yolox_post.hpp"

namespace platguard {

struct Waypoint {
    std::uint32_t frame = 0;
    double center_x = 0, center_y = 0, width = 0, height = 0;
};

struct Actor {
    int class_id = 0;
    std::vector<Waypoint> waypoints;
    double score_level = 0.9;
};

struct ScenarioSpec {
    std::string name;
    std::uint32_t duration_frames = 1;
    std::uint32_t image_width = 320;
    std::uint32_t image_height = 192;
    std::uint32_t num_classes = 8;
    std::vector<Actor> actors;
    std::uint64_t seed = 0;
    double jitter_px = 0;  // uniform +-jitter on box centers, drawn from seed
};

struct GroundTruthObject {
    int class_id = 0;
    BoundingBox box;
    std::uint32_t actor_id = 0;
    double score_level = 1.0;
    bool operator==(const GroundTruthObject&) const = default;
};

struct GroundTruthFrame {
    std::uint64_t frame_index = 0;
    std::vector<GroundTruthObject> objects;
    bool operator==(const GroundTruthFrame&) const = default;
};

inline void validate_spec(const ScenarioSpec& spec) {
    if (spec.duration_frames < 1) throw SpecError("duration_frames must be positive");
    if (spec.image_width == 0 || spec.image_height == 0) throw SpecError("image dimensions must be positive");
    if (spec.num_classes < 1) throw SpecError("num_classes must be >= 1");
    if (!(spec.jitter_px >= 0)) throw SpecError("jitter_px must be non-negative");
    for (std::size_t a = 0; a < spec.actors.size(); ++a) {
        const auto& actor = spec.actors[a];
        const auto tag = "actor " + std::to_string(a);
        if (actor.class_id < 0 || actor.class_id >= static_cast<int>(spec.num_classes))
            throw SpecError(tag + ": class_id out of range");
        if (!(actor.score_level > 0 && actor.score_level <= 1)) throw SpecError(tag + ": score_level must be in (0,1]");
        if (actor.waypoints.empty()) throw SpecError(tag + ": no waypoints");
        for (std::size_t i = 0; i < actor.waypoints.size(); ++i) {
            const auto& w = actor.waypoints[i];
            if (i > 0 && w.frame <= actor.waypoints[i - 1].frame)
                throw SpecError(tag + ": waypoints not sorted by frame at index " + std::to_string(i));
            if (!(w.width > 0 && w.height > 0)) throw SpecError(tag + ": waypoint box size must be positive");
        }
    }
}

namespace detail {

/// [-1, 1) from the top 53 bits; independent of the standard library's
/// distribution implementations.
inline double signed_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

}  // namespace detail

/// Linear interpolation between surrounding waypoints; an actor is absent
/// before its first and after its last waypoint.
inline std::vector<GroundTruthFrame> generate_scenario(const ScenarioSpec& spec) {
    validate_spec(spec);
    std::mt19937_64 rng(spec.seed);
    std::vector<GroundTruthFrame> frames(spec.duration_frames);
    const double W = spec.image_width, H = spec.image_height;

    for (std::uint32_t f = 0; f < spec.duration_frames; ++f) {
        frames[f].frame_index = f;
        for (std::uint32_t a = 0; a < spec.actors.size(); ++a) {
            const auto& wps = spec.actors[a].waypoints;
            if (f < wps.front().frame || f > wps.back().frame) continue;
            auto hi = std::lower_bound(wps.begin(), wps.end(), f,
                                       [](const Waypoint& w, std::uint32_t fr) { return w.frame < fr; });
            double cx, cy, w, h;
            if (hi->frame == f) {
                std::tie(cx, cy, w, h) = std::tuple{hi->center_x, hi->center_y, hi->width, hi->height};
            } else {
                const auto& p = *(hi - 1);
                const auto& q = *hi;
                const double t = static_cast<double>(f - p.frame) / static_cast<double>(q.frame - p.frame);
                cx = p.center_x + t * (q.center_x - p.center_x);
                cy = p.center_y + t * (q.center_y - p.center_y);
                w = p.width + t * (q.width - p.width);
                h = p.height + t * (q.height - p.height);
            }
            if (spec.jitter_px > 0) {
                cx += spec.jitter_px * detail::signed_unit(rng);
                cy += spec.jitter_px * detail::signed_unit(rng);
                cx = std::clamp(cx, 0.5 * w, W - 0.5 * w);
                cy = std::clamp(cy, 0.5 * h, H - 0.5 * h);
            }
            const auto box = BoundingBox::from_center(cx, cy, w, h);
            if (box.x1 < 0 || box.y1 < 0 || box.x2 > W || box.y2 > H)
                throw SpecError("actor " + std::to_string(a) + " leaves the image at frame " + std::to_string(f));
            frames[f].objects.push_back({spec.actors[a].class_id, box, a, spec.actors[a].score_level});
        }
    }
    return frames;
}

inline constexpr float kBackgroundLogit = -20.0f;

inline double logit(double p) noexcept {
    return std::clamp(std::log(p / (1.0 - p)), -30.0, 30.0);
}

/// Stride level whose cell size best matches a box about four cells wide.
inline std::size_t encoding_level(const BoundingBox& box, const std::array<std::uint32_t, kNumLevels>& strides) {
    const double size = std::sqrt(box.width() * box.height());
    std::size_t best = 0;
    double best_cost = std::abs(std::log(size / (4.0 * strides[0])));
    for (std::size_t k = 1; k < kNumLevels; ++k) {
        const double cost = std::abs(std::log(size / (4.0 * strides[k])));
        if (cost < best_cost) best = k, best_cost = cost;
    }
    return best;
}

/// Synthesises head tensors that decode_all maps back to `frame`'s objects,
/// each with fused score equal to its score_level.
inline RawTensorSet encode_objects_to_tensors(const GroundTruthFrame& frame, const DecodeConfig& config,
                                              std::uint32_t num_classes, std::uint32_t image_width,
                                              std::uint32_t image_height) {
    TensorStreamHeader geom;
    geom.num_classes = num_classes;
    geom.image_width = image_width;
    geom.image_height = image_height;
    geom.strides = config.strides;
    validate_geometry(geom);

    RawTensorSet out = make_uniform_frame(geom, frame.frame_index, 0.0f);
    for (auto& t : out.outputs)
        for (std::uint32_t gy = 0; gy < t.grid_h; ++gy)
            for (std::uint32_t gx = 0; gx < t.grid_w; ++gx)
                for (std::uint32_t c = kObjChannel; c < t.channels; ++c) t.at(gy, gx, c) = kBackgroundLogit;

    std::map<std::tuple<std::size_t, std::uint32_t, std::uint32_t>, std::size_t> occupied;
    for (std::size_t i = 0; i < frame.objects.size(); ++i) {
        const auto& obj = frame.objects[i];
        const auto& b = obj.box;
        if (!(b.width() > 0 && b.height() > 0))
            throw SpecError("frame " + std::to_string(frame.frame_index) + ": object " + std::to_string(i) +
                            " has an empty box");
        if (obj.class_id < 0 || obj.class_id >= static_cast<int>(num_classes))
            throw SpecError("frame " + std::to_string(frame.frame_index) + ": object class out of range");

        const std::size_t level = encoding_level(b, config.strides);
        const double s = config.strides[level];
        Tensor& t = out.outputs[level];
        const double ux = b.center_x() / s, uy = b.center_y() / s;
        const auto gx = static_cast<std::uint32_t>(std::clamp(std::floor(ux), 0.0, double(t.grid_w - 1)));
        const auto gy = static_cast<std::uint32_t>(std::clamp(std::floor(uy), 0.0, double(t.grid_h - 1)));

        auto [it, fresh] = occupied.try_emplace({level, gx, gy}, i);
        if (!fresh)
            throw EncodingCollisionError("frame " + std::to_string(frame.frame_index) + ": objects " +
                                         std::to_string(it->second) + " and " + std::to_string(i) +
                                         " share stride " + std::to_string(config.strides[level]) + " cell (" +
                                         std::to_string(gx) + ", " + std::to_string(gy) + ")");

        const auto half_logit = static_cast<float>(logit(std::sqrt(obj.score_level)));
        t.at(gy, gx, 0) = static_cast<float>(ux - gx);
        t.at(gy, gx, 1) = static_cast<float>(uy - gy);
        t.at(gy, gx, 2) = static_cast<float>(std::log(b.width() / s));
        t.at(gy, gx, 3) = static_cast<float>(std::log(b.height() / s));
        t.at(gy, gx, kObjChannel) = half_logit;
        t.at(gy, gx, kFirstClassChannel + static_cast<std::uint32_t>(obj.class_id)) = half_logit;
    }
    return out;
}

/// Generates the scenario and encodes every frame.
inline std::pair<TensorStreamHeader, std::vector<RawTensorSet>> render_scenario(
    const ScenarioSpec& spec, const std::vector<GroundTruthFrame>& truth, const DecodeConfig& config) {
    TensorStreamHeader h;
    h.num_classes = spec.num_classes;
    h.image_width = spec.image_width;
    h.image_height = spec.image_height;
    h.strides = config.strides;
    h.frame_count = static_cast<std::uint32_t>(truth.size());
    std::vector<RawTensorSet> frames;
    frames.reserve(truth.size());
    for (const auto& gt : truth)
        frames.push_back(encode_objects_to_tensors(gt, config, spec.num_classes, spec.image_width, spec.image_height));
    return {h, std::move(frames)};
}

// ---------------------------------------------------------------------------
// Built-in station and scenarios.
//
// 320x192 image, COCO-ordered class ids truncated to 8 (person = 0,
// train = 6). The track band at the top is the RISK zone, the yellow strip
// below it the DANGER zone, the platform the MONITOR zone.

struct StationLayout {
    std::uint32_t image_width = 320;
    std::uint32_t image_height = 192;
    std::uint32_t num_classes = 8;
    std::vector<Zone> zones;
};

inline StationLayout builtin_station() {
    StationLayout s;
    s.zones = {
        {ZoneKind::Risk, {{0, 16}, {320, 16}, {320, 88}, {0, 88}}, "track"},
        {ZoneKind::Danger, {{0, 88}, {320, 88}, {320, 112}, {0, 112}}, "yellow_line"},
        {ZoneKind::Monitor, {{0, 112}, {320, 112}, {320, 192}, {0, 192}}, "platform"},
    };
    return s;
}

inline constexpr int kPersonClass = 0;
inline constexpr int kTrainClass = 6;

namespace detail {

/// Approach over frames 10-40, stopped 40-64, departs 64-80.
inline Actor stopping_train() {
    return {kTrainClass,
            {{10, 280, 52, 60, 40}, {40, 160, 50, 300, 68}, {64, 160, 50, 300, 68}, {80, 40, 52, 60, 40}},
            0.9};
}

inline Actor person(std::vector<Waypoint> w, double score = 0.85) { return {kPersonClass, std::move(w), score}; }

inline ScenarioSpec base_spec(std::string name) {
    ScenarioSpec s;
    s.name = std::move(name);
    s.duration_frames = 100;
    s.seed = 2024;
    return s;
}

}  // namespace detail

/// Train cycle with no persons.
inline ScenarioSpec empty_platform_scenario() {
    auto s = detail::base_spec("empty_platform");
    s.actors = {detail::stopping_train()};
    return s;
}

/// A person walks into the yellow strip while the train approaches and steps
/// back before it stops; a second person strolls on the platform.
inline ScenarioSpec crossing_during_approach_scenario() {
    auto s = detail::base_spec("crossing_during_approach");
    s.actors = {
        detail::stopping_train(),
        detail::person({{0, 100, 150, 16, 40}, {15, 100, 150, 16, 40}, {25, 100, 80, 16, 40},
                        {32, 100, 80, 16, 40}, {42, 100, 150, 16, 40}, {99, 100, 150, 16, 40}}),
        detail::person({{0, 200, 160, 16, 40}, {99, 260, 160, 16, 40}}, 0.75),
    };
    return s;
}

/// Several persons on the platform, none reaching the yellow strip.
inline ScenarioSpec crowd_safe_scenario() {
    auto s = detail::base_spec("crowd_safe");
    s.actors = {
        detail::stopping_train(),
        detail::person({{0, 40, 140, 16, 40}, {99, 80, 150, 16, 40}}),
        detail::person({{0, 130, 160, 16, 40}, {99, 170, 135, 16, 40}}, 0.8),
        detail::person({{5, 220, 145, 16, 40}, {90, 250, 160, 16, 40}}, 0.7),
        detail::person({{0, 290, 150, 16, 40}, {99, 290, 150, 16, 40}}, 0.95),
    };
    return s;
}

/// Non-stopping train: IN then straight to OUT.
inline ScenarioSpec express_pass_scenario() {
    auto s = detail::base_spec("express_pass");
    s.duration_frames = 60;
    s.actors = {{kTrainClass, {{5, 280, 52, 60, 40}, {20, 160, 50, 300, 68}, {35, 40, 52, 60, 40}}, 0.9}};
    return s;
}

inline std::map<std::string, ScenarioSpec> builtin_scenarios() {
    std::map<std::string, ScenarioSpec> out;
    for (auto s : {empty_platform_scenario(), crossing_during_approach_scenario(), crowd_safe_scenario(),
                   express_pass_scenario()})
        out.emplace(s.name, std::move(s));
    return out;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const ScenarioSpec& s) {
    nlohmann::json actors = nlohmann::json::array();
    for (const auto& a : s.actors) {
        nlohmann::json wps = nlohmann::json::array();
        for (const auto& w : a.waypoints) wps.push_back({w.frame, w.center_x, w.center_y, w.width, w.height});
        actors.push_back({{"class", a.class_id}, {"score_level", a.score_level}, {"waypoints", wps}});
    }
    return {{"name", s.name},         {"duration_frames", s.duration_frames},
            {"image_width", s.image_width}, {"image_height", s.image_height},
            {"num_classes", s.num_classes}, {"seed", s.seed},
            {"jitter_px", s.jitter_px},     {"actors", actors}};
}

inline ScenarioSpec scenario_from_json(const nlohmann::json& j) {
    try {
        ScenarioSpec s;
        s.name = j.value("name", std::string{"custom"});
        s.duration_frames = j.at("duration_frames").get<std::uint32_t>();
        s.image_width = j.value("image_width", s.image_width);
        s.image_height = j.value("image_height", s.image_height);
        s.num_classes = j.value("num_classes", s.num_classes);
        s.seed = j.value("seed", s.seed);
        s.jitter_px = j.value("jitter_px", 0.0);
        for (const auto& ja : j.at("actors")) {
            Actor a;
            a.class_id = ja.at("class").get<int>();
            a.score_level = ja.value("score_level", a.score_level);
            for (const auto& w : ja.at("waypoints")) {
                if (!w.is_array() || w.size() != 5) throw SpecError("waypoint must be [frame, cx, cy, w, h]");
                a.waypoints.push_back({w[0].get<std::uint32_t>(), w[1].get<double>(), w[2].get<double>(),
                                       w[3].get<double>(), w[4].get<double>()});
            }
            s.actors.push_back(std::move(a));
        }
        validate_spec(s);
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("scenario JSON: ") + e.what());
    }
}

inline nlohmann::json ground_truth_to_json(const ScenarioSpec& spec, std::span<const GroundTruthFrame> frames) {
    nlohmann::json jf = nlohmann::json::array();
    for (const auto& f : frames) {
        nlohmann::json objs = nlohmann::json::array();
        for (const auto& o : f.objects)
            objs.push_back({{"actor", o.actor_id},
                            {"class", o.class_id},
                            {"box", {o.box.x1, o.box.y1, o.box.x2, o.box.y2}},
                            {"score_level", o.score_level}});
        jf.push_back({{"frame", f.frame_index}, {"objects", objs}});
    }
    return {{"scenario", spec.name},
            {"image_width", spec.image_width},
            {"image_height", spec.image_height},
            {"num_classes", spec.num_classes},
            {"frames", jf}};
}

inline std::vector<GroundTruthFrame> ground_truth_from_json(const nlohmann::json& j) {
    try {
        std::vector<GroundTruthFrame> out;
        for (const auto& jf : j.at("frames")) {
            GroundTruthFrame f;
            f.frame_index = jf.at("frame").get<std::uint64_t>();
            for (const auto& o : jf.at("objects")) {
                const auto& b = o.at("box");
                f.objects.push_back({o.at("class").get<int>(),
                                     {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                                      b.at(3).get<double>()},
                                     o.value("actor", 0u),
                                     o.value("score_level", 1.0)});
            }
            out.push_back(std::move(f));
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("ground truth JSON: ") + e.what());
    }
}

}  // namespace platguard
