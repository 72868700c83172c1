#pragma once

// Per-frame orchestration: decode -> NMS -> class split -> train FSM step ->
// zone tests -> severity-graded alerts.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "platguard/errors.hpp"
#include "platguard/station_geometry.hpp"
#include "platguard/tensor_io.hpp"
#include "platguard/train_state.hpp"
#include "platguard/yolox_post.hpp"

namespace platguard {

enum class Severity : std::uint8_t { Caution, Warning, Critical };

inline std::string_view to_string(Severity s) noexcept {
    switch (s) {
        case Severity::Caution: return "CAUTION";
        case Severity::Warning: return "WARNING";
        case Severity::Critical: return "CRITICAL";
    }
    return "?";
}

inline std::optional<Severity> severity_from_string(std::string_view s) noexcept {
    if (s == "CAUTION") return Severity::Caution;
    if (s == "WARNING") return Severity::Warning;
    if (s == "CRITICAL") return Severity::Critical;
    return std::nullopt;
}

/// Severity of a DANGER-zone intrusion, indexed by train state.
struct SeverityTable {
    std::array<Severity, 4> danger{Severity::Caution, Severity::Critical, Severity::Warning, Severity::Warning};

    Severity operator[](TrainState s) const noexcept { return danger[static_cast<std::size_t>(s)]; }
    bool operator==(const SeverityTable&) const = default;
};

/// Only DANGER zones alert.
inline std::optional<Severity> severity_for(TrainState state, ZoneKind kind, const SeverityTable& table = {}) {
    if (kind != ZoneKind::Danger) return std::nullopt;
    return table[state];
}

/// Maps a detection to metric height inputs. Calibration is deployment
/// specific, so none is built in.
using HeightResolver = std::function<std::optional<HeightQuery>(const Detection&)>;

struct PipelineConfig {
    DecodeConfig decode;
    std::vector<Zone> zones;
    std::optional<CameraModel> camera;
    FsmConfig fsm;
    SeverityTable severity;
    HeightResolver height_resolver;

    const Zone& risk_zone() const {
        for (const auto& z : zones)
            if (z.kind == ZoneKind::Risk) return z;
        throw ConfigError("configuration has no RISK zone");
    }

    /// Requires exactly one RISK zone and at least one DANGER zone.
    void validate(std::uint32_t num_classes) const {
        decode.validate(num_classes);
        fsm.validate();
        if (camera) camera->validate();
        int risk = 0, danger = 0;
        for (const auto& z : zones) {
            z.validate();
            risk += z.kind == ZoneKind::Risk;
            danger += z.kind == ZoneKind::Danger;
        }
        if (risk == 0) throw ConfigError("configuration is missing a RISK zone");
        if (risk > 1) throw ConfigError("configuration must have exactly one RISK zone, found " + std::to_string(risk));
        if (danger == 0) throw ConfigError("configuration is missing a DANGER zone");
    }
};

struct AlertEvent {
    std::uint64_t frame_index = 0;
    std::string zone;
    TrainState state = TrainState::Off;
    Severity severity = Severity::Caution;
    Detection detection;
    std::optional<double> est_height_m;
};

struct StageLatency {
    double decode_ms = 0, nms_ms = 0, geometry_ms = 0, fsm_ms = 0;
    double total() const noexcept { return decode_ms + nms_ms + geometry_ms + fsm_ms; }
    double max_stage() const noexcept { return std::max({decode_ms, nms_ms, geometry_ms, fsm_ms}); }
};

struct StateTransition {
    std::uint64_t frame_index = 0;
    TrainState from = TrainState::Off;
    TrainState to = TrainState::Off;
};

struct FrameResult {
    std::uint64_t frame_index = 0;
    std::vector<Detection> detections;  // post-NMS
    TrainState state = TrainState::Off;
    std::vector<AlertEvent> alerts;
    std::uint32_t monitor_presence = 0;  // person ground points inside MONITOR zones
    StageLatency latency;
    std::optional<StateTransition> transition;
    std::optional<std::string> error;  // set when the frame could not be decoded
};

namespace detail {

class StageTimer {
public:
    StageTimer() : start_(std::chrono::steady_clock::now()) {}
    double lap() {
        const auto now = std::chrono::steady_clock::now();
        const double ms = std::chrono::duration<double, std::milli>(now - start_).count();
        start_ = now;
        return ms;
    }

private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

/// Processes one frame. The FSM is stepped before persons are checked, so a
/// train first seen in this frame already sets this frame's severity.
/// A decode failure yields a result with `error` set and leaves the FSM untouched.
inline FrameResult process_frame(const RawTensorSet& frame, const PipelineConfig& config, TrainStateMachine& fsm) {
    FrameResult r;
    r.frame_index = frame.frame_index;
    r.state = fsm.state();
    detail::StageTimer timer;

    std::vector<Detection> raw;
    try {
        raw = decode_all(frame, config.decode);
    } catch (const Error& e) {
        r.latency.decode_ms = timer.lap();
        r.error = e.what();
        return r;
    }
    r.latency.decode_ms = timer.lap();

    r.detections = nms(raw, config.decode.nms_iou_threshold);
    r.latency.nms_ms = timer.lap();

    const auto trains = filter_class(r.detections, config.decode.train_class_id);
    const auto obs = observe_train(trains, config.risk_zone(), fsm.last_observation());
    if (auto t = fsm.step(obs)) r.transition = StateTransition{frame.frame_index, t->first, t->second};
    r.state = fsm.state();
    r.latency.fsm_ms = timer.lap();

    const auto persons = filter_class(r.detections, config.decode.person_class_id);
    for (const auto& p : persons) {
        const auto gp = ground_point(p);
        for (const auto& zone : config.zones) {
            if (zone.kind == ZoneKind::Risk || !point_in_zone(gp, zone)) continue;
            const auto sev = severity_for(r.state, zone.kind, config.severity);
            if (!sev) {
                ++r.monitor_presence;
                continue;
            }
            AlertEvent a{frame.frame_index, zone.name, r.state, *sev, p, std::nullopt};
            if (config.camera && config.height_resolver) {
                if (auto q = config.height_resolver(p)) {
                    try {
                        a.est_height_m = estimate_height(*config.camera, *q);
                    } catch (const DomainError&) {
                    }
                }
            }
            r.alerts.push_back(std::move(a));
        }
    }
    r.latency.geometry_ms = timer.lap();
    return r;
}

/// Owns the configuration and FSM for one camera stream.
class SafetyPipeline {
public:
    explicit SafetyPipeline(PipelineConfig config) : config_(std::move(config)), fsm_(config_.fsm) {}

    FrameResult process(const RawTensorSet& frame) { return process_frame(frame, config_, fsm_); }
    TrainState state() const noexcept { return fsm_.state(); }
    const PipelineConfig& config() const noexcept { return config_; }

private:
    PipelineConfig config_;
    TrainStateMachine fsm_;
};

// ---------------------------------------------------------------------------
// Records

inline std::string alert_jsonl(const AlertEvent& a) {
    nlohmann::json zone = a.zone;
    std::string s = "{\"frame\":" + std::to_string(a.frame_index) + ",\"zone\":" + zone.dump() + ",\"state\":\"" +
                    std::string(to_string(a.state)) + "\",\"severity\":\"" + std::string(to_string(a.severity)) +
                    "\",\"box\":" + box_json(a.detection.box) + ",\"score\":" + fixed6(a.detection.score);
    if (a.est_height_m) s += ",\"height_m\":" + fixed6(*a.est_height_m);
    return s + "}";
}

inline std::string transition_jsonl(const StateTransition& t) {
    return "{\"frame\":" + std::to_string(t.frame_index) + ",\"from\":\"" + std::string(to_string(t.from)) +
           "\",\"to\":\"" + std::string(to_string(t.to)) + "\"}";
}

inline std::string result_jsonl(const FrameResult& r) {
    std::string s = "{\"frame\":" + std::to_string(r.frame_index) + ",\"state\":\"" +
                    std::string(to_string(r.state)) + "\",\"detections\":" + detections_json_array(r.detections) +
                    ",\"alerts\":" + std::to_string(r.alerts.size()) +
                    ",\"monitor_presence\":" + std::to_string(r.monitor_presence) + ",\"latency_ms\":{\"decode\":" +
                    fixed6(r.latency.decode_ms) + ",\"nms\":" + fixed6(r.latency.nms_ms) +
                    ",\"geometry\":" + fixed6(r.latency.geometry_ms) + ",\"fsm\":" + fixed6(r.latency.fsm_ms) + "}";
    if (r.error) s += ",\"error\":" + nlohmann::json(*r.error).dump();
    return s + "}";
}

/// Receives pipeline output in frame order. Throwing SinkError aborts the run.
class PipelineSink {
public:
    virtual ~PipelineSink() = default;
    virtual void on_transition(const StateTransition&) {}
    virtual void on_alert(const AlertEvent&) {}
    virtual void on_result(const FrameResult&) {}
};

/// JSON Lines writer; any null stream is skipped.
class JsonlSink final : public PipelineSink {
public:
    JsonlSink(std::ostream* alerts, std::ostream* results, std::ostream* transitions = nullptr)
        : alerts_(alerts), results_(results), transitions_(transitions) {}

    void on_transition(const StateTransition& t) override { emit(transitions_, transition_jsonl(t), "transition"); }
    void on_alert(const AlertEvent& a) override { emit(alerts_, alert_jsonl(a), "alert"); }
    void on_result(const FrameResult& r) override { emit(results_, result_jsonl(r), "result"); }

private:
    static void emit(std::ostream* os, const std::string& line, const char* what) {
        if (!os) return;
        *os << line << '\n';
        if (!*os) throw SinkError(std::string("failed to write ") + what + " record");
    }

    std::ostream* alerts_;
    std::ostream* results_;
    std::ostream* transitions_;
};

/// Collects everything in memory; used by tests and the verify command.
class CollectingSink final : public PipelineSink {
public:
    void on_transition(const StateTransition& t) override { transitions.push_back(t); }
    void on_alert(const AlertEvent& a) override { alerts.push_back(a); }
    void on_result(const FrameResult& r) override { results.push_back(r); }

    std::vector<StateTransition> transitions;
    std::vector<AlertEvent> alerts;
    std::vector<FrameResult> results;
};

/// Fans out to several sinks in order.
class TeeSink final : public PipelineSink {
public:
    explicit TeeSink(std::vector<PipelineSink*> sinks) : sinks_(std::move(sinks)) {}
    void on_transition(const StateTransition& t) override { for (auto* s : sinks_) s->on_transition(t); }
    void on_alert(const AlertEvent& a) override { for (auto* s : sinks_) s->on_alert(a); }
    void on_result(const FrameResult& r) override { for (auto* s : sinks_) s->on_result(r); }

private:
    std::vector<PipelineSink*> sinks_;
};

struct RunSummary {
    std::uint64_t frames = 0;  // frames pulled from the backend, including failed ones
    std::uint64_t alerts = 0;
    std::uint64_t errors = 0;
    bool aborted = false;
    std::string abort_reason;
};

/// Drives `backend` to end of stream. Frames that fail to decode are counted
/// and skipped. A backend read failure is counted and ends the run, since the
/// stream cannot be resynchronised. A sink failure aborts with the partial summary.
inline RunSummary run_pipeline(InferenceBackendPort& backend, const PipelineConfig& config, PipelineSink& sink) {
    const auto& geom = backend.geometry();
    config.validate(geom.num_classes);
    if (geom.strides != config.decode.strides)
        throw ConfigError("backend strides differ from decode.strides in the configuration");

    RunSummary summary;
    TrainStateMachine fsm(config.fsm);
    while (true) {
        std::optional<RawTensorSet> frame;
        try {
            frame = backend.next_frame();
        } catch (const Error& e) {
            ++summary.errors;
            summary.abort_reason = e.what();
            break;
        }
        if (!frame) break;
        ++summary.frames;
        const FrameResult r = process_frame(*frame, config, fsm);
        if (r.error) ++summary.errors;
        summary.alerts += r.alerts.size();
        try {
            if (r.transition) sink.on_transition(*r.transition);
            for (const auto& a : r.alerts) sink.on_alert(a);
            sink.on_result(r);
        } catch (const SinkError& e) {
            summary.aborted = true;
            summary.abort_reason = e.what();
            break;
        }
    }
    return summary;
}

// ---------------------------------------------------------------------------
// Configuration document
//
// {
//   "decode": {"strides": [8,16,32], "conf_threshold": 0.3, "nms_iou_threshold": 0.45,
//              "person_class_id": 0, "train_class_id": 6},
//   "zones":  [{"name": "...", "kind": "DANGER|RISK|MONITOR", "polygon": [[x,y], ...]}],
//   "camera": {"height_m": 3.0, "z0_m": 6.0},                       (optional)
//   "fsm":    {"stationary_eps_px": 2.0, "confirm_frames": 5},
//   "severity": {"OFF": "CAUTION", "IN": "CRITICAL", ...}          (optional)
// }

inline nlohmann::json to_json(const PipelineConfig& c) {
    nlohmann::json zones = nlohmann::json::array();
    for (const auto& z : c.zones) {
        nlohmann::json poly = nlohmann::json::array();
        for (const auto& p : z.polygon) poly.push_back({p.x, p.y});
        zones.push_back({{"name", z.name}, {"kind", std::string(to_string(z.kind))}, {"polygon", poly}});
    }
    nlohmann::json sev = nlohmann::json::object();
    for (auto s : {TrainState::Off, TrainState::In, TrainState::On, TrainState::Out})
        sev[std::string(to_string(s))] = std::string(to_string(c.severity[s]));
    nlohmann::json j = {
        {"decode",
         {{"strides", c.decode.strides},
          {"conf_threshold", c.decode.conf_threshold},
          {"nms_iou_threshold", c.decode.nms_iou_threshold},
          {"person_class_id", c.decode.person_class_id},
          {"train_class_id", c.decode.train_class_id}}},
        {"zones", zones},
        {"fsm", {{"stationary_eps_px", c.fsm.stationary_eps_px}, {"confirm_frames", c.fsm.confirm_frames}}},
        {"severity", sev}};
    if (c.camera) j["camera"] = {{"height_m", c.camera->camera_height_m}, {"z0_m", c.camera->optical_axis_ground_m}};
    return j;
}

/// Parses and structurally validates a configuration document. Class-id range
/// checks need the stream's class count and happen in PipelineConfig::validate.
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
    PipelineConfig c;
    try {
        if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
        if (j.contains("decode")) {
            const auto& d = j.at("decode");
            if (d.contains("strides")) c.decode.strides = d.at("strides").get<std::array<std::uint32_t, kNumLevels>>();
            c.decode.conf_threshold = d.value("conf_threshold", c.decode.conf_threshold);
            c.decode.nms_iou_threshold = d.value("nms_iou_threshold", c.decode.nms_iou_threshold);
            c.decode.person_class_id = d.value("person_class_id", c.decode.person_class_id);
            c.decode.train_class_id = d.value("train_class_id", c.decode.train_class_id);
        }
        if (!j.contains("zones") || !j.at("zones").is_array()) throw ConfigError("configuration has no \"zones\" array");
        for (const auto& jz : j.at("zones")) {
            Zone z;
            z.name = jz.at("name").get<std::string>();
            const auto kind = jz.at("kind").get<std::string>();
            const auto k = zone_kind_from_string(kind);
            if (!k) throw ConfigError("zone '" + z.name + "' has unknown kind '" + kind + "'");
            z.kind = *k;
            for (const auto& p : jz.at("polygon")) {
                if (!p.is_array() || p.size() != 2) throw ConfigError("zone '" + z.name + "': vertex must be [x, y]");
                z.polygon.push_back({p[0].get<double>(), p[1].get<double>()});
            }
            c.zones.push_back(std::move(z));
        }
        if (j.contains("camera")) {
            const auto& jc = j.at("camera");
            c.camera = CameraModel{jc.at("height_m").get<double>(), jc.at("z0_m").get<double>()};
        }
        if (j.contains("fsm")) {
            const auto& f = j.at("fsm");
            c.fsm.stationary_eps_px = f.value("stationary_eps_px", c.fsm.stationary_eps_px);
            c.fsm.confirm_frames = f.value("confirm_frames", c.fsm.confirm_frames);
        }
        if (j.contains("severity")) {
            for (const auto& [key, val] : j.at("severity").items()) {
                const auto st = train_state_from_string(key);
                const auto sv = severity_from_string(val.get<std::string>());
                if (!st || !sv) throw ConfigError("bad severity entry '" + key + "'");
                c.severity.danger[static_cast<std::size_t>(*st)] = *sv;
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("configuration: ") + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(std::string("configuration: ") + e.what());
    }
    int risk = 0, danger = 0;
    for (const auto& z : c.zones) {
        risk += z.kind == ZoneKind::Risk;
        danger += z.kind == ZoneKind::Danger;
    }
    if (risk == 0) throw ConfigError("configuration is missing a RISK zone");
    if (danger == 0) throw ConfigError("configuration is missing a DANGER zone");
    c.validate(std::numeric_limits<std::uint32_t>::max());
    return c;
}

}  // namespace platguard
